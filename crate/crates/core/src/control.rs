//! State-feedback stabilization through the `M = FP` change of variables,
//! plus the general eigenvalue checks used to confirm the recovered gains.

use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bmi::Assignment;
use crate::cert::{certify, CertifyOptions, DualityCertificate};
use crate::convexify::ChangeOfVariables;
use crate::error::{Error, Result};
use crate::sdp::{self, SdpStatus};
use crate::symmat::SymMat;

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 10_000;
const PBH_REL_TOL: f64 = 1e-9;
const GENERATION_BUDGET: usize = 1000;
const DEFAULT_HALVINGS: usize = 10;
const MARGIN_TOL_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    ContinuousTime,
    DiscreteTime,
}

impl Clock {
    pub fn name(&self) -> &'static str {
        match self {
            Clock::ContinuousTime => "continuous",
            Clock::DiscreteTime => "discrete",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    clock: Clock,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, clock: Clock) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{} but A is {}x{}",
                b.nrows(),
                b.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { a, b, clock })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn closed_loop(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a + &self.b * f
    }
}

/// Eigenvalues of a general real matrix, sorted by real then imaginary part.
pub fn eig_general(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let schur = a
        .clone()
        .try_schur(SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or(Error::ConvergenceFailure)?;
    let mut eigs: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eigs)
}

pub fn max_real_part(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eig_general(a)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `max Re λ < −tol`.
pub fn is_hurwitz(a: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(max_real_part(a)? < -tol)
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eig_general(a)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

pub fn is_stable(sys: &LtiSystem, closed_loop: &DMatrix<f64>) -> Result<bool> {
    match sys.clock {
        Clock::ContinuousTime => is_hurwitz(closed_loop, 0.0),
        Clock::DiscreteTime => Ok(spectral_radius(closed_loop)? < 1.0),
    }
}

/// PBH test: `rank [A − λI, B] = n` for every eigenvalue outside the stable region.
pub fn pbh_stabilizable(sys: &LtiSystem) -> Result<bool> {
    let n = sys.n();
    let m = sys.m();
    for lam in eig_general(&sys.a)? {
        let unstable = match sys.clock {
            Clock::ContinuousTime => lam.re >= 0.0,
            Clock::DiscreteTime => lam.norm() >= 1.0,
        };
        if !unstable {
            continue;
        }
        let mut h = DMatrix::<Complex<f64>>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = Complex::new(sys.a[(i, j)], 0.0);
            }
            h[(i, i)] -= lam;
            for j in 0..m {
                h[(i, n + j)] = Complex::new(sys.b[(i, j)], 0.0);
            }
        }
        let sv = h.singular_values();
        let scale = sv.iter().fold(1.0_f64, |a, s| a.max(*s));
        let rank = sv.iter().filter(|s| **s > PBH_REL_TOL * scale).count();
        if rank < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rejection-samples a stabilizable pair with `N(0, 1/n)` entries (spectral radius near 1).
pub fn random_stabilizable(n: usize, m: usize, seed: u64, clock: Clock) -> Result<LtiSystem> {
    if !(1..=8).contains(&n) || !(1..=n).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "need 1 ≤ n ≤ 8 and 1 ≤ m ≤ n, got n={n}, m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (n as f64).sqrt()).expect("valid normal");
    for _ in 0..GENERATION_BUDGET {
        let a = DMatrix::from_fn(n, n, |_, _| normal.sample(&mut rng));
        let b = DMatrix::from_fn(n, m, |_, _| normal.sample(&mut rng));
        let sys = LtiSystem::new(a, b, clock)?;
        if pbh_stabilizable(&sys)? {
            return Ok(sys);
        }
    }
    Err(Error::GenerationBudgetExceeded(GENERATION_BUDGET))
}

/// `1e-3·‖A‖_F`, or `1e-3` for `A = 0`.
pub fn default_epsilon(sys: &LtiSystem) -> f64 {
    let f = sys.a.norm();
    if f > 0.0 {
        1e-3 * f
    } else {
        1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Starting `ε`; `None` uses [`default_epsilon`].
    pub epsilon: Option<f64>,
    pub halvings: usize,
    /// Success needs a margin program optimum `t* < −margin_tol`.
    pub margin_tol: f64,
    pub certify: CertifyOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            halvings: DEFAULT_HALVINGS,
            margin_tol: 1e-9,
            certify: CertifyOptions {
                samples: 20,
                ..CertifyOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationResult {
    pub p: SymMat,
    pub m: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub epsilon: f64,
    /// `−t*` of the margin program.
    pub margin: f64,
    pub closed_loop_eigs: Vec<Complex<f64>>,
    /// Discrete time only: largest eigenvalue of `XP⁻¹Xᵀ − P + εI` with `X = AP + BM`.
    pub nonlinear_residual: Option<f64>,
    pub certificate: DualityCertificate,
}

impl StabilizationResult {
    /// `max Re λ` (continuous) or `max |λ|` (discrete) of `A + BF`.
    pub fn stability_measure(&self, clock: Clock) -> f64 {
        match clock {
            Clock::ContinuousTime => self
                .closed_loop_eigs
                .iter()
                .map(|l| l.re)
                .fold(f64::NEG_INFINITY, f64::max),
            Clock::DiscreteTime => self
                .closed_loop_eigs
                .iter()
                .map(|l| l.norm())
                .fold(0.0, f64::max),
        }
    }
}

/// Margin program optimum `t*` at a fixed `ε`, from a tight solve.
fn margin_optimum(
    sys: &LtiSystem,
    epsilon: f64,
    tol_gap: f64,
    tol_feas: f64,
) -> Result<(f64, Vec<f64>)> {
    let c = ChangeOfVariables::control(sys, epsilon)?;
    let sol = sdp::solve(c.target(), tol_gap, tol_feas);
    match sol.status {
        SdpStatus::Optimal => Ok((sol.primal_value, sol.v)),
        // a strictly feasible point still bounds t* from above
        SdpStatus::NumericalFailure
            if sdp::residuals(c.target(), &sol.v).iter().all(|r| *r <= 0.0) =>
        {
            Ok((sol.primal_value, sol.v))
        }
        s => Err(Error::SolverFailure(format!(
            "margin program ended with status {s:?}"
        ))),
    }
}

/// `−t*` of the margin program at `ε`: positive exactly when the Lyapunov
/// inequality is strictly feasible.
pub fn slater_margin(sys: &LtiSystem, epsilon: f64) -> Result<f64> {
    Ok(-margin_optimum(sys, epsilon, MARGIN_TOL_GAP, sdp::DEFAULT_TOL_FEAS)?.0)
}

/// Synthesizes `F` for either clock, halving `ε` on failure.
pub fn synthesize(sys: &LtiSystem, opts: &SynthesisOptions) -> Result<StabilizationResult> {
    let mut eps = opts.epsilon.unwrap_or_else(|| default_epsilon(sys));
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    let mut last_margin = f64::NEG_INFINITY;
    for _ in 0..=opts.halvings {
        let (t, _) = margin_optimum(sys, eps, opts.certify.tol_gap, opts.certify.tol_feas)?;
        last_margin = -t;
        if t < -opts.margin_tol {
            return finish(sys, eps, opts);
        }
        eps /= 2.0;
    }
    Err(Error::NotStabilizable { last_margin })
}

fn finish(sys: &LtiSystem, epsilon: f64, opts: &SynthesisOptions) -> Result<StabilizationResult> {
    let c = ChangeOfVariables::control(sys, epsilon)?;
    let certificate = certify(c.source(), &c, &opts.certify);
    if let Some(stage) = &certificate.failed_stage {
        return Err(Error::SolverFailure(stage.clone()));
    }
    let x: &Assignment = &certificate.recovered_x;
    let p = SymMat::new(x.get("P")?.clone())?;
    let f = x.get("F")?.clone();
    let m = certificate.image_point.get("M")?.clone();
    let t = x.scalar("t")?;
    let closed = sys.closed_loop(&f);
    let closed_loop_eigs = eig_general(&closed)?;
    if !is_stable(sys, &closed)? {
        return Err(Error::SolverFailure(
            "recovered gain does not stabilize the closed loop".into(),
        ));
    }
    let nonlinear_residual = match sys.clock {
        Clock::ContinuousTime => None,
        Clock::DiscreteTime => Some(dt_nonlinear_residual(sys, epsilon, &p, &m, 0.0)?),
    };
    Ok(StabilizationResult {
        p,
        m,
        f,
        epsilon,
        margin: -t,
        closed_loop_eigs,
        nonlinear_residual,
        certificate,
    })
}

fn require_clock(sys: &LtiSystem, clock: Clock) -> Result<()> {
    if sys.clock != clock {
        return Err(Error::InvalidArgument(format!(
            "expected a {} system",
            clock.name()
        )));
    }
    Ok(())
}

/// Continuous-time synthesis starting at `epsilon` (default when `None`).
pub fn ct_synthesize(
    sys: &LtiSystem,
    epsilon: Option<f64>,
    tol: f64,
) -> Result<StabilizationResult> {
    require_clock(sys, Clock::ContinuousTime)?;
    synthesize(
        sys,
        &SynthesisOptions {
            epsilon,
            margin_tol: tol,
            ..SynthesisOptions::default()
        },
    )
}

/// Discrete-time synthesis starting at `epsilon` (default when `None`).
pub fn dt_synthesize(
    sys: &LtiSystem,
    epsilon: Option<f64>,
    tol: f64,
) -> Result<StabilizationResult> {
    require_clock(sys, Clock::DiscreteTime)?;
    synthesize(
        sys,
        &SynthesisOptions {
            epsilon,
            margin_tol: tol,
            ..SynthesisOptions::default()
        },
    )
}

/// `(A + BF)P + P(A + BF)ᵀ + εI`.
pub fn ct_bilinear_residual(
    sys: &LtiSystem,
    epsilon: f64,
    p: &SymMat,
    f: &DMatrix<f64>,
) -> Result<SymMat> {
    let cl = sys.closed_loop(f);
    let x = &cl * p.as_matrix();
    SymMat::new(&x + x.transpose() + DMatrix::identity(sys.n(), sys.n()) * epsilon)
}

/// `(A + BF)P(A + BF)ᵀ − P + εI`.
pub fn dt_bilinear_residual(
    sys: &LtiSystem,
    epsilon: f64,
    p: &SymMat,
    f: &DMatrix<f64>,
) -> Result<SymMat> {
    let cl = sys.closed_loop(f);
    let q = &cl * p.as_matrix() * cl.transpose();
    SymMat::new(
        0.5 * (&q + q.transpose()) - p.as_matrix() + DMatrix::identity(sys.n(), sys.n()) * epsilon,
    )
}

/// Largest eigenvalue of `[[−P + (ε − t)I, X], [Xᵀ, −P]]` with `X = AP + BM`.
pub fn dt_block_residual(
    sys: &LtiSystem,
    epsilon: f64,
    p: &SymMat,
    m: &DMatrix<f64>,
    t: f64,
) -> Result<f64> {
    let n = sys.n();
    let x = &sys.a * p.as_matrix() + &sys.b * m;
    let mut blk = DMatrix::zeros(2 * n, 2 * n);
    blk.view_mut((0, 0), (n, n))
        .copy_from(&(-p.as_matrix() + DMatrix::identity(n, n) * (epsilon - t)));
    blk.view_mut((0, n), (n, n)).copy_from(&x);
    blk.view_mut((n, 0), (n, n)).copy_from(&x.transpose());
    blk.view_mut((n, n), (n, n)).copy_from(&(-p.as_matrix()));
    Ok(SymMat::new(blk)?.max_eig())
}

/// Largest eigenvalue of `XP⁻¹Xᵀ − P + (ε − t)I`; needs `P ≻ 0`.
pub fn dt_nonlinear_residual(
    sys: &LtiSystem,
    epsilon: f64,
    p: &SymMat,
    m: &DMatrix<f64>,
    t: f64,
) -> Result<f64> {
    let n = sys.n();
    let pinv = crate::symmat::cholesky(p)?.inverse();
    let x = &sys.a * p.as_matrix() + &sys.b * m;
    let q = &x * pinv.as_matrix() * x.transpose();
    let r = 0.5 * (&q + q.transpose()) - p.as_matrix() + DMatrix::identity(n, n) * (epsilon - t);
    Ok(SymMat::new(r)?.max_eig())
}
