//! Linear-objective SDPs in block-LMI form and a dense log-barrier
//! path-following solver.
//!
//! Problem: minimize `cᵀv` subject to `Fᵢ(v) = Fᵢ₀ + Σⱼ vⱼ Fᵢⱼ ⪯ 0` for every
//! block `i`. The dual blocks satisfy `Zᵢ ⪰ 0`, the Lagrangian is
//! `cᵀv + Σᵢ Tr(Zᵢ Fᵢ(v))`, and dual feasibility reads
//! `cⱼ + Σᵢ Tr(Zᵢ Fᵢⱼ) = 0`. The dual objective is `Σᵢ Tr(Zᵢ Fᵢ₀)`.
//!
//! Symmetric matrix variables are flattened to their upper triangle in
//! row-major order; the coordinate `pᵢⱼ` (`i < j`) multiplies `Eᵢⱼ + Eⱼᵢ`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symmat::{cholesky_raw, Cholesky, SymMat};

pub const DEFAULT_TOL_GAP: f64 = 1e-7;
pub const DEFAULT_TOL_FEAS: f64 = 1e-8;
/// Newton steps allowed per solver phase.
pub const MAX_NEWTON_STEPS: usize = 200;
const PROJECTION_PASSES: usize = 3;
/// Objective level along the central path below which the problem is declared unbounded.
pub const UNBOUNDED_LEVEL: f64 = -1e12;
/// Half-width of the coordinate box the phase-1 problem is posed in.
pub const PHASE1_RADIUS: f64 = 1e6;

const MU0: f64 = 1.0;
const MU_FACTOR: f64 = 5.0;
const CENTERING_TOL: f64 = 1e-3;
const POLISH_STEPS: usize = 12;
const REFINEMENT_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    Scalar,
    Matrix { rows: usize, cols: usize },
    Symmetric(usize),
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Scalar => 1,
            VarShape::Matrix { rows, cols } => rows * cols,
            VarShape::Symmetric(n) => n * (n + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarShape::Scalar => (1, 1),
            VarShape::Matrix { rows, cols } => (rows, cols),
            VarShape::Symmetric(n) => (n, n),
        }
    }

    /// The matrix multiplied by coordinate `k`.
    pub fn basis(&self, k: usize) -> DMatrix<f64> {
        let (r, c) = self.shape();
        let mut e = DMatrix::zeros(r, c);
        match *self {
            VarShape::Scalar => e[(0, 0)] = 1.0,
            VarShape::Matrix { cols, .. } => e[(k / cols, k % cols)] = 1.0,
            VarShape::Symmetric(n) => {
                let (i, j) = sym_index(n, k);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
            }
        }
        e
    }

    pub fn unflatten(&self, coords: &[f64]) -> DMatrix<f64> {
        debug_assert_eq!(coords.len(), self.len());
        let (r, c) = self.shape();
        match *self {
            VarShape::Scalar => DMatrix::from_element(1, 1, coords[0]),
            VarShape::Matrix { .. } => DMatrix::from_row_slice(r, c, coords),
            VarShape::Symmetric(n) => {
                let mut m = DMatrix::zeros(n, n);
                for (k, &x) in coords.iter().enumerate() {
                    let (i, j) = sym_index(n, k);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
                m
            }
        }
    }

    /// Inverse of [`unflatten`](Self::unflatten); symmetric values are read
    /// from the upper triangle.
    pub fn flatten(&self, m: &DMatrix<f64>) -> Vec<f64> {
        match *self {
            VarShape::Scalar => vec![m[(0, 0)]],
            VarShape::Matrix { rows, cols } => (0..rows)
                .flat_map(|i| (0..cols).map(move |j| (i, j)))
                .map(|ij| m[ij])
                .collect(),
            VarShape::Symmetric(n) => (0..n)
                .flat_map(|i| (i..n).map(move |j| (i, j)))
                .map(|ij| m[ij])
                .collect(),
        }
    }
}

fn sym_index(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i;
        if k < row {
            return (i, i + k);
        }
        k -= row;
    }
    panic!("symmetric coordinate out of range");
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarEntry {
    pub name: String,
    pub shape: VarShape,
    pub offset: usize,
}

/// `F₀ + Σⱼ vⱼ Fⱼ` over one block.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixExpr {
    constant: SymMat,
    coeffs: Vec<(usize, SymMat)>,
}

impl AffineMatrixExpr {
    pub fn new(constant: SymMat, coeffs: Vec<(usize, SymMat)>) -> Result<Self> {
        let dim = constant.dim();
        let mut merged: BTreeMap<usize, SymMat> = BTreeMap::new();
        for (j, f) in coeffs {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient of variable {j} has dimension {} but the block has {dim}",
                    f.dim()
                )));
            }
            match merged.get_mut(&j) {
                Some(acc) => *acc = &*acc + &f,
                None => {
                    merged.insert(j, f);
                }
            }
        }
        let coeffs = merged.into_iter().filter(|(_, f)| !f.is_zero()).collect();
        Ok(Self { constant, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn constant(&self) -> &SymMat {
        &self.constant
    }

    pub fn coeffs(&self) -> &[(usize, SymMat)] {
        &self.coeffs
    }

    pub fn eval(&self, v: &[f64]) -> SymMat {
        let mut m = self.constant.as_matrix().clone();
        for (j, f) in &self.coeffs {
            if v[*j] != 0.0 {
                m += f.as_matrix() * v[*j];
            }
        }
        SymMat::symmetrized(m)
    }

    /// `Σⱼ Tr(Z Fⱼ) eⱼ`, the adjoint of the linear part.
    pub fn adjoint_into(&self, z: &SymMat, out: &mut [f64]) {
        for (j, f) in &self.coeffs {
            out[*j] += z.inner(f);
        }
    }

    pub fn scaled(&self, gamma: f64) -> Self {
        Self {
            constant: self.constant.scaled(gamma),
            coeffs: self
                .coeffs
                .iter()
                .map(|(j, f)| (*j, f.scaled(gamma)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    objective: Vec<f64>,
    blocks: Vec<AffineMatrixExpr>,
    vars: Vec<VarEntry>,
}

impl SdpProblem {
    pub fn new(
        objective: Vec<f64>,
        blocks: Vec<AffineMatrixExpr>,
        vars: Vec<VarEntry>,
    ) -> Result<Self> {
        let nvars = objective.len();
        let mut next = 0;
        for v in &vars {
            if v.offset != next {
                return Err(Error::DimensionMismatch(format!(
                    "variable `{}` starts at {} but {} was expected",
                    v.name, v.offset, next
                )));
            }
            next += v.shape.len();
        }
        if next != nvars {
            return Err(Error::DimensionMismatch(format!(
                "name table covers {next} coordinates, objective has {nvars}"
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            if let Some((j, _)) = b.coeffs.iter().find(|(j, _)| *j >= nvars) {
                return Err(Error::DimensionMismatch(format!(
                    "block {i} references coordinate {j} >= {nvars}"
                )));
            }
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            objective,
            blocks,
            vars,
        })
    }

    pub fn nvars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn blocks(&self) -> &[AffineMatrixExpr] {
        &self.blocks
    }

    pub fn vars(&self) -> &[VarEntry] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Option<&VarEntry> {
        self.vars.iter().find(|v| v.name == name)
    }

    /// Value of a named variable at the flat point `v`.
    pub fn extract(&self, name: &str, v: &[f64]) -> Result<DMatrix<f64>> {
        let e = self
            .var(name)
            .ok_or_else(|| Error::UnknownBlock(name.to_string()))?;
        Ok(e.shape.unflatten(&v[e.offset..e.offset + e.shape.len()]))
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }

    pub fn eval_block(&self, i: usize, v: &[f64]) -> SymMat {
        self.blocks[i].eval(v)
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(AffineMatrixExpr::dim).sum()
    }

    pub fn with_block_scaled(&self, i: usize, gamma: f64) -> Self {
        let mut out = self.clone();
        out.blocks[i] = out.blocks[i].scaled(gamma);
        out
    }

    pub fn with_objective(&self, objective: Vec<f64>) -> Result<Self> {
        Self::new(objective, self.blocks.clone(), self.vars.clone())
    }

    /// Adds `|vⱼ − centerⱼ| ≤ radius` as scalar blocks.
    pub fn with_box(&self, center: &[f64], radius: f64) -> Self {
        let mut out = self.clone();
        for (j, &c) in center.iter().enumerate() {
            out.blocks.push(scalar_block(-c - radius, vec![(j, 1.0)]));
            out.blocks.push(scalar_block(c - radius, vec![(j, -1.0)]));
        }
        out
    }
}

fn scalar_block(constant: f64, coeffs: Vec<(usize, f64)>) -> AffineMatrixExpr {
    AffineMatrixExpr {
        constant: SymMat::scalar(constant),
        coeffs: coeffs
            .into_iter()
            .map(|(j, c)| (j, SymMat::scalar(c)))
            .collect(),
    }
}

/// Incremental construction of an [`SdpProblem`] from structured variables.
#[derive(Debug, Default)]
pub struct SdpBuilder {
    vars: Vec<VarEntry>,
    objective: BTreeMap<usize, f64>,
    blocks: Vec<AffineMatrixExpr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

impl SdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: &str, shape: VarShape) -> VarId {
        let offset = self.vars.last().map_or(0, |v| v.offset + v.shape.len());
        self.vars.push(VarEntry {
            name: name.to_string(),
            shape,
            offset,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn entry(&self, id: VarId) -> &VarEntry {
        &self.vars[id.0]
    }

    /// Adds `w(X)` to the objective for a linear functional `w` given on basis matrices.
    pub fn minimize(&mut self, id: VarId, w: impl Fn(&DMatrix<f64>) -> f64) {
        let e = self.vars[id.0].clone();
        for k in 0..e.shape.len() {
            let c = w(&e.shape.basis(k));
            if c != 0.0 {
                *self.objective.entry(e.offset + k).or_insert(0.0) += c;
            }
        }
    }

    pub fn block(&self, dim: usize) -> BlockBuilder<'_> {
        BlockBuilder {
            builder: self,
            constant: DMatrix::zeros(dim, dim),
            coeffs: Vec::new(),
        }
    }

    pub fn push_block(&mut self, block: AffineMatrixExpr) -> usize {
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    /// `lo ≤ Σ wⱼ vⱼ ≤ hi` encoded as two scalar blocks.
    pub fn add_range(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64) {
        self.blocks.push(scalar_block(-hi, terms.to_vec()));
        self.blocks.push(scalar_block(
            lo,
            terms.iter().map(|&(j, w)| (j, -w)).collect(),
        ));
    }

    /// Equality encoded as a pair of inequalities sharing the slack `tol`.
    pub fn add_equality(&mut self, terms: &[(usize, f64)], rhs: f64, tol: f64) {
        self.add_range(terms, rhs - tol, rhs + tol);
    }

    pub fn build(self) -> Result<SdpProblem> {
        let nvars = self.vars.last().map_or(0, |v| v.offset + v.shape.len());
        let mut c = vec![0.0; nvars];
        for (j, w) in self.objective {
            c[j] = w;
        }
        SdpProblem::new(c, self.blocks, self.vars)
    }
}

pub struct BlockBuilder<'a> {
    builder: &'a SdpBuilder,
    constant: DMatrix<f64>,
    coeffs: Vec<(usize, SymMat)>,
}

impl BlockBuilder<'_> {
    pub fn constant(mut self, m: &DMatrix<f64>) -> Self {
        self.constant += m;
        self
    }

    /// Adds the linear map `X ↦ map(X)` applied to variable `id`; `map` must
    /// return a symmetric block-sized matrix for every basis matrix.
    pub fn linear(
        mut self,
        id: VarId,
        map: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    ) -> Result<Self> {
        let e = self.builder.entry(id).clone();
        for k in 0..e.shape.len() {
            let img = SymMat::new(map(&e.shape.basis(k)))?;
            self.coeffs.push((e.offset + k, img));
        }
        Ok(self)
    }

    pub fn finish(self) -> Result<AffineMatrixExpr> {
        AffineMatrixExpr::new(SymMat::new(self.constant)?, self.coeffs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub v: Vec<f64>,
    /// Dual blocks `Zᵢ ⪰ 0`, one per constraint block.
    pub z: Vec<SymMat>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    /// `‖c + Σ adjᵢ(Zᵢ)‖∞`.
    pub dual_residual: f64,
    /// Final barrier parameter.
    pub mu: f64,
    /// For `Infeasible`: `Zᵢ ⪰ 0` with `Σ Tr Zᵢ = 1`, `Σ adjᵢ(Zᵢ) ≈ 0`, `Σ Tr(Zᵢ Fᵢ₀) ≥ 0`.
    pub farkas: Option<Vec<SymMat>>,
}

impl SdpSolution {
    pub fn gap(&self) -> f64 {
        (self.primal_value - self.dual_value).abs()
    }
}

/// Dual objective `Σ Tr(Zᵢ Fᵢ₀)` implied by the solution's dual blocks.
pub fn sdp_dual_value(p: &SdpProblem, sol: &SdpSolution) -> f64 {
    p.blocks
        .iter()
        .zip(&sol.z)
        .map(|(b, z)| z.inner(&b.constant))
        .sum()
}

/// `max_eig(Fᵢ(v))` per block; negative means strictly feasible.
pub fn residuals(p: &SdpProblem, v: &[f64]) -> Vec<f64> {
    p.blocks.iter().map(|b| b.eval(v).max_eig()).collect()
}

/// `c + Σ adjᵢ(Zᵢ)`.
pub fn dual_residual(p: &SdpProblem, z: &[SymMat]) -> Vec<f64> {
    let mut r = p.objective.clone();
    for (b, zi) in p.blocks.iter().zip(z) {
        b.adjoint_into(zi, &mut r);
    }
    r
}

// ---------------------------------------------------------------------------
// barrier machinery

/// Factorizations of the slacks `Sᵢ = −Fᵢ(v)`; `None` when some slack is not PD.
fn slacks(p: &SdpProblem, v: &[f64]) -> Option<Vec<Cholesky>> {
    p.blocks
        .iter()
        .map(|b| cholesky_raw(&(-b.eval(v).as_matrix())))
        .collect()
}

fn log_barrier(chols: &[Cholesky]) -> f64 {
    -chols.iter().map(Cholesky::log_det).sum::<f64>()
}

/// Gradient and Hessian of `−Σ log det(−Fᵢ(v))` plus the slack inverses.
fn barrier_derivatives(
    p: &SdpProblem,
    chols: &[Cholesky],
) -> (DVector<f64>, DMatrix<f64>, Vec<SymMat>) {
    let n = p.nvars();
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut inverses = Vec::with_capacity(chols.len());
    for (b, ch) in p.blocks.iter().zip(chols) {
        let sinv = ch.inverse();
        if b.dim() == 1 {
            let s = sinv.get(0, 0);
            for (a, (ja, fa)) in b.coeffs.iter().enumerate() {
                let ga = s * fa.get(0, 0);
                grad[*ja] += ga;
                for (jb, fb) in &b.coeffs[a..] {
                    let gb = s * fb.get(0, 0);
                    hess[(*ja, *jb)] += ga * gb;
                }
            }
        } else {
            let g: Vec<DMatrix<f64>> = b
                .coeffs
                .iter()
                .map(|(_, f)| sinv.as_matrix() * f.as_matrix())
                .collect();
            let gt: Vec<DMatrix<f64>> = g.iter().map(|m| m.transpose()).collect();
            for (a, (ja, _)) in b.coeffs.iter().enumerate() {
                grad[*ja] += g[a].trace();
                for (bidx, (jb, _)) in b.coeffs.iter().enumerate().skip(a) {
                    hess[(*ja, *jb)] += g[a].dot(&gt[bidx]);
                }
            }
        }
        inverses.push(sinv);
    }
    // Coefficient lists are sorted by coordinate, so only the upper triangle was filled.
    for i in 0..n {
        for j in 0..i {
            hess[(i, j)] = hess[(j, i)];
        }
    }
    (grad, hess, inverses)
}

/// Solves `H x = b` for symmetric PSD `H` with Jacobi scaling and a growing ridge.
fn solve_newton(h: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            if h[(i, i)] > 0.0 {
                1.0 / h[(i, i)].sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| h[(i, j)] * d[i] * d[j]);
    let rhs = DVector::from_fn(n, |i, _| b[i] * d[i]);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut m = scaled.clone();
        for i in 0..n {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = cholesky_raw(&m) {
            let mut y = ch.solve(&rhs);
            for _ in 0..REFINEMENT_STEPS {
                let r = &rhs - &scaled * &y;
                y += ch.solve(&r);
            }
            return Some(DVector::from_fn(n, |i, _| y[i] * d[i]));
        }
        ridge = if ridge == 0.0 { 1e-14 } else { ridge * 100.0 };
    }
    None
}

#[derive(Debug)]
enum CenterError {
    IterationCap,
    Stalled,
    LostFeasibility,
    Unbounded,
}

struct PathState {
    v: Vec<f64>,
    mu: f64,
    iterations: usize,
    cap: usize,
}

/// Minimizes `cᵀv/μ + φ(v)` from a strictly feasible point with damped Newton.
/// Returns the final squared Newton decrement.
fn center(
    p: &SdpProblem,
    st: &mut PathState,
    tol: f64,
    max_extra: Option<usize>,
) -> std::result::Result<f64, CenterError> {
    let c = DVector::from_column_slice(&p.objective);
    let mut taken = 0;
    let mut last_dec = f64::INFINITY;
    loop {
        let chols = slacks(p, &st.v).ok_or(CenterError::LostFeasibility)?;
        let (gphi, h, _) = barrier_derivatives(p, &chols);
        let g = &c / st.mu + gphi;
        let dv = match solve_newton(&h, &(-&g)) {
            Some(dv) => dv,
            None => return Err(CenterError::Stalled),
        };
        let dec2 = (-g.dot(&dv)).max(0.0);
        if dec2 / 2.0 <= tol {
            return Ok(dec2);
        }
        if let Some(limit) = max_extra {
            // polishing: stop once progress stalls at rounding level
            if taken >= limit || dec2 >= last_dec {
                return Ok(dec2.min(last_dec));
            }
        }
        last_dec = dec2;
        if st.iterations >= st.cap {
            return Err(CenterError::IterationCap);
        }
        let lambda = dec2.sqrt();
        let mut alpha = if lambda > 0.25 {
            1.0 / (1.0 + lambda)
        } else {
            1.0
        };
        let mut accepted = false;
        let phi0 = log_barrier(&chols);
        let lin = c.dot(&dv) / st.mu;
        for _ in 0..60 {
            let trial: Vec<f64> =
                st.v.iter()
                    .zip(dv.iter())
                    .map(|(x, d)| x + alpha * d)
                    .collect();
            if let Some(ch) = slacks(p, &trial) {
                // The damped step is a guaranteed decrease in exact arithmetic;
                // guard against rounding only when far from the minimizer.
                let ok = lambda <= 0.25 || alpha * lin + log_barrier(&ch) - phi0 <= 0.0;
                if ok {
                    st.v = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        st.iterations += 1;
        taken += 1;
        if !accepted {
            return Err(CenterError::Stalled);
        }
        if p.objective_value(&st.v) < UNBOUNDED_LEVEL {
            return Err(CenterError::Unbounded);
        }
    }
}

struct PathResult {
    status: SdpStatus,
    state: PathState,
}

/// Follows the central path from `v0` until `μ·Σnᵢ ≤ gap_target(cᵀv)` or
/// `stop` accepts the state after a centering stage.
fn follow_path(
    p: &SdpProblem,
    v0: Vec<f64>,
    gap_target: impl Fn(f64) -> f64,
    mut stop: impl FnMut(&PathState) -> bool,
) -> PathResult {
    let total = p.total_dim() as f64;
    let mut st = PathState {
        v: v0,
        mu: MU0,
        iterations: 0,
        cap: MAX_NEWTON_STEPS,
    };
    loop {
        match center(p, &mut st, CENTERING_TOL, None) {
            Ok(_) => {}
            Err(CenterError::Unbounded) => {
                return PathResult {
                    status: SdpStatus::Unbounded,
                    state: st,
                }
            }
            Err(CenterError::IterationCap) | Err(CenterError::LostFeasibility) => {
                return PathResult {
                    status: SdpStatus::NumericalFailure,
                    state: st,
                }
            }
            Err(CenterError::Stalled) => {
                // Rounding-limited centering is acceptable once the gap target is met.
                let pval = p.objective_value(&st.v);
                if stop(&st) {
                    return PathResult {
                        status: SdpStatus::Optimal,
                        state: st,
                    };
                }
                if st.mu * total > gap_target(pval) {
                    return PathResult {
                        status: SdpStatus::NumericalFailure,
                        state: st,
                    };
                }
            }
        }
        let pval = p.objective_value(&st.v);
        if pval < UNBOUNDED_LEVEL {
            return PathResult {
                status: SdpStatus::Unbounded,
                state: st,
            };
        }
        if stop(&st) {
            return PathResult {
                status: SdpStatus::Optimal,
                state: st,
            };
        }
        if st.mu * total <= gap_target(pval) {
            // polish so the implied dual is feasible to rounding level
            st.cap = st.iterations + POLISH_STEPS;
            let _ = center(p, &mut st, 1e-30, Some(POLISH_STEPS));
            return PathResult {
                status: SdpStatus::Optimal,
                state: st,
            };
        }
        st.mu /= MU_FACTOR;
    }
}

/// `Zᵢ = μ Sᵢ⁻¹(Sᵢ + Dᵢ)Sᵢ⁻¹` where `Dᵢ` is the linear part of block `i`
/// along the Newton step; this satisfies `c + Σ adjᵢ(Zᵢ) = 0` up to the
/// accuracy of the Newton solve. Falls back to `μ Sᵢ⁻¹` if the correction
/// leaves the PSD cone.
fn dual_blocks(p: &SdpProblem, v: &[f64], mu: f64) -> Option<Vec<SymMat>> {
    let chols = slacks(p, v)?;
    let (gphi, h, inverses) = barrier_derivatives(p, &chols);
    let plain: Vec<SymMat> = inverses.iter().map(|s| s.scaled(mu)).collect();
    let c = DVector::from_column_slice(&p.objective);
    let g = &c / mu + gphi;
    let Some(dv) = solve_newton(&h, &(-&g)) else {
        return Some(plain);
    };
    let mut out = Vec::with_capacity(p.blocks.len());
    for ((b, ch), sinv) in p.blocks.iter().zip(&chols).zip(&inverses) {
        let mut d = DMatrix::zeros(b.dim(), b.dim());
        for (j, f) in &b.coeffs {
            d += f.as_matrix() * dv[*j];
        }
        let s = ch.factor() * ch.factor().transpose();
        let z = sinv.as_matrix() * (s + d) * sinv.as_matrix() * mu;
        let z = SymMat::symmetrized(z);
        if z.min_eig() < 0.0 {
            return Some(plain);
        }
        out.push(z);
    }
    Some(out)
}

/// Correction `Zᵢ + Zᵢ Aᵢ(y) Zᵢ` with `y` chosen so that `c + Σ adjᵢ` vanishes,
/// removing the rounding left in the dual residual by the `O(1/μ)` slack
/// inverses. The `Zᵢ`-weighted metric leaves nearly inactive blocks (tiny
/// `Zᵢ`) untouched, so the dual value barely moves.
fn project_dual(p: &SdpProblem, mut z: Vec<SymMat>) -> Vec<SymMat> {
    for _ in 0..PROJECTION_PASSES {
        match project_once(p, &z) {
            Some(next) => z = next,
            None => break,
        }
    }
    z
}

fn project_once(p: &SdpProblem, z: &[SymMat]) -> Option<Vec<SymMat>> {
    let n = p.nvars();
    let r = DVector::from_vec(dual_residual(p, z));
    let mut gram = DMatrix::zeros(n, n);
    let weighted: Vec<Vec<DMatrix<f64>>> = p
        .blocks
        .iter()
        .zip(z)
        .map(|(b, zi)| {
            b.coeffs
                .iter()
                .map(|(_, f)| zi.as_matrix() * f.as_matrix())
                .collect()
        })
        .collect();
    for (b, wz) in p.blocks.iter().zip(&weighted) {
        for (a, (ja, _)) in b.coeffs.iter().enumerate() {
            for (bi, (jb, _)) in b.coeffs.iter().enumerate().skip(a) {
                let g = wz[a].dot(&wz[bi].transpose());
                gram[(*ja, *jb)] += g;
                if ja != jb {
                    gram[(*jb, *ja)] += g;
                }
            }
        }
    }
    let y = pinv_solve(&gram, &(-&r))?;
    let corrected: Vec<SymMat> = p
        .blocks
        .iter()
        .zip(z)
        .map(|(b, zi)| {
            let mut ay = DMatrix::zeros(b.dim(), b.dim());
            for (j, f) in &b.coeffs {
                ay += f.as_matrix() * y[*j];
            }
            SymMat::symmetrized(zi.as_matrix() + zi.as_matrix() * ay * zi.as_matrix())
        })
        .collect();
    let norm = |v: &[f64]| v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    (norm(&dual_residual(p, &corrected)) < norm(r.as_slice())).then_some(corrected)
}

/// Least-norm solution of a symmetric PSD system through its eigendecomposition,
/// with Jacobi scaling; directions below `1e-15` of the largest are dropped.
fn pinv_solve(g: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = g.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            if g[(i, i)] > 0.0 {
                1.0 / g[(i, i)].sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * d[i] * d[j]);
    let rhs = DVector::from_fn(n, |i, _| b[i] * d[i]);
    let eig = scaled.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0_f64, |a, x| a.max(*x));
    if !(top > 0.0) {
        return None;
    }
    let coeffs = eig.eigenvectors.transpose() * rhs;
    let mut y = DVector::zeros(n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam > 1e-15 * top {
            y += eig.eigenvectors.column(k) * (coeffs[k] / lam);
        }
    }
    Some(DVector::from_fn(n, |i, _| y[i] * d[i]))
}

/// Phase-1 problem: minimize `s` subject to `Fᵢ(v) ⪯ s·I` and `|vⱼ| ≤ PHASE1_RADIUS`.
fn phase1_problem(p: &SdpProblem) -> SdpProblem {
    let n = p.nvars();
    let mut blocks: Vec<AffineMatrixExpr> = p
        .blocks
        .iter()
        .map(|b| {
            let mut coeffs = b.coeffs.clone();
            coeffs.push((n, -&SymMat::identity(b.dim())));
            AffineMatrixExpr {
                constant: b.constant.clone(),
                coeffs,
            }
        })
        .collect();
    for j in 0..n {
        blocks.push(scalar_block(-PHASE1_RADIUS, vec![(j, 1.0)]));
        blocks.push(scalar_block(-PHASE1_RADIUS, vec![(j, -1.0)]));
    }
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut vars = p.vars.clone();
    vars.push(VarEntry {
        name: "__phase1_s".into(),
        shape: VarShape::Scalar,
        offset: n,
    });
    SdpProblem {
        objective,
        blocks,
        vars,
    }
}

fn phase1_start(p: &SdpProblem) -> Vec<f64> {
    let n = p.nvars();
    let zero = vec![0.0; n];
    let worst = residuals(p, &zero)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut start = zero;
    start.push(worst.max(0.0) + 1.0);
    start
}

#[derive(Debug, Clone)]
pub struct Phase1Report {
    /// `−s*`; positive exactly when a strictly feasible point exists in the phase-1 box.
    pub margin: f64,
    /// Point attaining the margin (original coordinates).
    pub point: Vec<f64>,
    pub iterations: usize,
    pub status: SdpStatus,
}

/// Solves the phase-1 problem to optimality and reports the Slater margin `−s*`.
pub fn slater_margin(p: &SdpProblem) -> Phase1Report {
    let aux = phase1_problem(p);
    let n = p.nvars();
    if p.blocks.is_empty() {
        return Phase1Report {
            margin: f64::INFINITY,
            point: vec![0.0; n],
            iterations: 0,
            status: SdpStatus::Optimal,
        };
    }
    let res = follow_path(
        &aux,
        phase1_start(p),
        |s| 1e-10 * (1.0 + s.abs()),
        |_| false,
    );
    let s = res.state.v[n];
    Phase1Report {
        margin: -s,
        point: res.state.v[..n].to_vec(),
        iterations: res.state.iterations,
        status: res.status,
    }
}

enum Start {
    Point(Vec<f64>, usize),
    Infeasible(Vec<SymMat>, Vec<f64>, usize),
    Failure(Vec<f64>, usize),
}

fn strict_start(p: &SdpProblem, tol_feas: f64) -> Start {
    let n = p.nvars();
    let zero = vec![0.0; n];
    if residuals(p, &zero).iter().all(|r| *r < -1e-6) {
        return Start::Point(zero, 0);
    }
    let aux = phase1_problem(p);
    let res = follow_path(
        &aux,
        phase1_start(p),
        |s| 0.1 * tol_feas * (1.0 + s.abs()),
        |st| st.v[n] < 0.0,
    );
    let it = res.state.iterations;
    let s = res.state.v[n];
    let v = res.state.v[..n].to_vec();
    if s < 0.0 && slacks(p, &v).is_some() {
        return Start::Point(v, it);
    }
    if res.status == SdpStatus::Optimal && s >= -tol_feas {
        let witness = dual_blocks(&aux, &res.state.v, res.state.mu)
            .map(|z| {
                let z: Vec<SymMat> = z.into_iter().take(p.blocks.len()).collect();
                let tr: f64 = z.iter().map(SymMat::trace).sum();
                z.iter()
                    .map(|zi| zi.scaled(1.0 / tr.max(f64::MIN_POSITIVE)))
                    .collect()
            })
            .unwrap_or_default();
        return Start::Infeasible(witness, v, it);
    }
    Start::Failure(v, it)
}

/// Solves `p` with the barrier method. Status `Optimal` guarantees the
/// [`SdpSolution`] invariants at the given tolerances.
pub fn solve(p: &SdpProblem, tol_gap: f64, tol_feas: f64) -> SdpSolution {
    let n = p.nvars();
    let failed = |v: Vec<f64>,
                  status: SdpStatus,
                  iterations: usize,
                  farkas: Option<Vec<SymMat>>| SdpSolution {
        primal_value: p.objective_value(&v),
        dual_value: f64::NEG_INFINITY,
        z: Vec::new(),
        v,
        status,
        iterations,
        dual_residual: f64::INFINITY,
        mu: f64::NAN,
        farkas,
    };

    if p.blocks.is_empty() {
        let status = if p.objective.iter().all(|c| *c == 0.0) {
            SdpStatus::Optimal
        } else {
            SdpStatus::Unbounded
        };
        let mut sol = failed(vec![0.0; n], status, 0, None);
        if status == SdpStatus::Optimal {
            sol.dual_value = 0.0;
            sol.dual_residual = 0.0;
            sol.mu = 0.0;
        }
        return sol;
    }

    let (v0, it0) = match strict_start(p, tol_feas) {
        Start::Point(v, it) => (v, it),
        Start::Infeasible(w, v, it) => return failed(v, SdpStatus::Infeasible, it, Some(w)),
        Start::Failure(v, it) => return failed(v, SdpStatus::NumericalFailure, it, None),
    };

    // Continue well past the nominal gap target: at tiny μ the centering is
    // rounding-limited, so each stage is checked as a certificate candidate
    // and the first one meeting every tolerance is kept.
    let total = p.total_dim() as f64;
    let mut accepted: Option<Candidate> = None;
    let res = follow_path(
        p,
        v0,
        |pv| 1e-3 * tol_gap * (1.0 + pv.abs()),
        |st| {
            if st.mu * total > tol_gap * (1.0 + p.objective_value(&st.v).abs()) {
                return false;
            }
            match candidate(p, &st.v, st.mu, tol_gap, tol_feas) {
                Some(c) if c.pass => {
                    accepted = Some(c);
                    true
                }
                _ => false,
            }
        },
    );
    let iterations = it0 + res.state.iterations;
    let mu = res.state.mu;
    let cand = match accepted {
        Some(c) => c,
        None => {
            if res.status == SdpStatus::Unbounded {
                return failed(res.state.v, res.status, iterations, None);
            }
            match candidate(p, &res.state.v, mu, tol_gap, tol_feas) {
                Some(c) => c,
                None => return failed(res.state.v, SdpStatus::NumericalFailure, iterations, None),
            }
        }
    };
    let status = if cand.pass {
        SdpStatus::Optimal
    } else {
        SdpStatus::NumericalFailure
    };
    SdpSolution {
        primal_value: p.objective_value(&cand.v),
        v: cand.v,
        z: cand.z,
        dual_value: cand.dual_value,
        status,
        iterations,
        dual_residual: cand.dual_residual,
        mu: cand.mu,
        farkas: None,
    }
}

struct Candidate {
    v: Vec<f64>,
    z: Vec<SymMat>,
    mu: f64,
    dual_value: f64,
    dual_residual: f64,
    pass: bool,
}

fn candidate(p: &SdpProblem, v: &[f64], mu: f64, tol_gap: f64, tol_feas: f64) -> Option<Candidate> {
    let z = project_dual(p, dual_blocks(p, v, mu)?);
    let primal_value = p.objective_value(v);
    let dual_value: f64 = p
        .blocks
        .iter()
        .zip(&z)
        .map(|(b, zi)| zi.inner(&b.constant))
        .sum();
    let dual_res = dual_residual(p, &z)
        .iter()
        .fold(0.0_f64, |a, r| a.max(r.abs()));
    let cscale = 1.0 + p.objective.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    let feasible = residuals(p, v).iter().all(|r| *r <= tol_feas);
    let gap_ok = (primal_value - dual_value).abs() <= tol_gap * (1.0 + primal_value.abs());
    let dual_ok = dual_res <= tol_feas * cscale && z.iter().all(|zi| zi.min_eig() >= -tol_feas);
    Some(Candidate {
        v: v.to_vec(),
        z,
        mu,
        dual_value,
        dual_residual: dual_res,
        pass: feasible && gap_ok && dual_ok,
    })
}

/// Minimizer of the log barrier alone, from a strictly feasible `start`.
/// The feasible set must be bounded.
pub fn analytic_center(p: &SdpProblem, start: &[f64]) -> Result<Vec<f64>> {
    let zero_obj = p.with_objective(vec![0.0; p.nvars()])?;
    if slacks(&zero_obj, start).is_none() {
        return Err(Error::DomainViolation(
            "analytic-center start is not strictly feasible".into(),
        ));
    }
    let mut st = PathState {
        v: start.to_vec(),
        mu: 1.0,
        iterations: 0,
        cap: MAX_NEWTON_STEPS,
    };
    match center(&zero_obj, &mut st, 1e-12, None) {
        Ok(_) | Err(CenterError::Stalled) => Ok(st.v),
        Err(e) => Err(Error::SolverFailure(format!("analytic center: {e:?}"))),
    }
}
