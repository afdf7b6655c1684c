//! Randomized properties of the solver, the problem IR and the control layer.

use convexdual::bmi::{
    dual_oracle, lagrangian, primal_oracle, Assignment, BmiProblem, Multipliers,
};
use convexdual::control::{
    default_epsilon, eig_general, random_stabilizable, slater_margin, Clock,
};
use convexdual::convexify::{example1_source, example2_source, ChangeOfVariables};
use convexdual::sdp::{self, residuals, SdpBuilder, SdpProblem, SdpStatus, VarShape};
use convexdual::symmat::{is_nsd, SymMat};
use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// solver

fn solved(p: &SdpProblem) -> sdp::SdpSolution {
    let sol = sdp::solve(p, sdp::DEFAULT_TOL_GAP, sdp::DEFAULT_TOL_FEAS);
    assert_eq!(sol.status, SdpStatus::Optimal);
    sol
}

fn test_problems() -> Vec<(&'static str, SdpProblem)> {
    let dint = convexdual::corpus::builtin("ct_double_integrator")
        .unwrap()
        .change_of_variables()
        .unwrap();
    vec![
        ("example1", ChangeOfVariables::example1().target().clone()),
        ("example2", ChangeOfVariables::example2().target().clone()),
        ("double_integrator", dint.target().clone()),
    ]
}

#[test]
fn weak_duality_against_random_feasible_points() {
    for (name, p) in test_problems() {
        let sol = solved(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let radius = 1.0 + sol.v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let mut found = 0;
        let mut draws = 0;
        while found < 100 {
            draws += 1;
            assert!(draws < 2_000_000, "{name}: rejection sampling starved");
            let v: Vec<f64> = sol
                .v
                .iter()
                .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            if residuals(&p, &v).iter().all(|r| *r <= 0.0) {
                found += 1;
                assert!(
                    sol.dual_value <= p.objective_value(&v) + 1e-7,
                    "{name}: dual {} above feasible value",
                    sol.dual_value
                );
            }
        }
    }
}

#[test]
fn solver_is_deterministic() {
    for (name, p) in test_problems() {
        let a = sdp::solve(&p, 1e-7, 1e-8);
        let b = sdp::solve(&p, 1e-7, 1e-8);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.v), bits(&b.v), "{name}");
        assert_eq!(a.iterations, b.iterations, "{name}");
        assert_eq!(a.dual_value.to_bits(), b.dual_value.to_bits(), "{name}");
        for (za, zb) in a.z.iter().zip(&b.z) {
            assert_eq!(
                bits(za.as_matrix().as_slice()),
                bits(zb.as_matrix().as_slice()),
                "{name}"
            );
        }
    }
}

#[test]
fn block_scaling_moves_only_the_dual() {
    let p = ChangeOfVariables::example2().target().clone();
    let base = solved(&p);
    for gamma in [0.1, 10.0] {
        for i in 0..p.blocks().len() {
            let scaled = solved(&p.with_block_scaled(i, gamma));
            for (a, b) in base.v.iter().zip(&scaled.v) {
                assert!(
                    (a - b).abs() <= 1e-5 * (1.0 + a.abs()),
                    "γ={gamma} block {i}: v {a} vs {b}"
                );
            }
            let expect = base.z[i].scaled(1.0 / gamma);
            let diff = (expect.as_matrix() - scaled.z[i].as_matrix()).amax();
            assert!(
                diff <= 1e-5 * (1.0 + expect.max_abs()),
                "γ={gamma} block {i}: Z off by {diff:e}"
            );
        }
    }
}

#[test]
fn equality_pinned_psd_corner() {
    // minimize v2 s.t. [[1, v1], [v1, v2]] ⪰ 0 with v1 pinned to 2
    let mut b = SdpBuilder::new();
    let v1 = b.add_var("v1", VarShape::Scalar);
    let v2 = b.add_var("v2", VarShape::Scalar);
    b.minimize(v2, |_| 1.0);
    let psd = b
        .block(2)
        .constant(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]))
        .linear(v1, |x| {
            DMatrix::from_row_slice(2, 2, &[0.0, -x[(0, 0)], -x[(0, 0)], 0.0])
        })
        .unwrap()
        .linear(v2, |x| {
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -x[(0, 0)]])
        })
        .unwrap()
        .finish()
        .unwrap();
    b.push_block(psd);
    b.add_equality(&[(0, 1.0)], 2.0, 1e-7);
    let p = b.build().unwrap();
    let sol = solved(&p);
    assert!((sol.v[1] - 4.0).abs() < 1e-5, "v2* = {}", sol.v[1]);
    assert!((sol.v[0] - 2.0).abs() < 1e-6);
}

#[test]
fn convexified_examples_have_known_duals() {
    for (c, expect) in [
        (ChangeOfVariables::example1(), 1.0),
        (ChangeOfVariables::example2(), 2.0),
    ] {
        let sol = solved(c.target());
        assert!((sdp::sdp_dual_value(c.target(), &sol) - expect).abs() < 1e-6);
        assert!((sol.primal_value - expect).abs() < 1e-6);
    }
}

// ---------------------------------------------------------------------------
// problem IR

fn random_assignment(p: &BmiProblem, rng: &mut ChaCha8Rng) -> Assignment {
    let coords: Vec<f64> = (0..p.ncoords())
        .map(|_| rng.random_range(-5.0..5.0))
        .collect();
    p.assignment_from_coords(&coords)
}

#[test]
fn lagrangian_with_zero_multipliers_is_the_objective() {
    let sys = random_stabilizable(3, 2, 5, Clock::ContinuousTime).unwrap();
    let control = ChangeOfVariables::control(&sys, default_epsilon(&sys)).unwrap();
    let problems = [
        example1_source(-3.0, 3.0),
        example2_source(0.5, 3.0),
        control.source().clone(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in &problems {
        let zero = Multipliers::zeros_for(p);
        for _ in 0..500 {
            let x = random_assignment(p, &mut rng);
            assert_eq!(
                lagrangian(p, &x, &zero).unwrap(),
                p.objective_value(&x).unwrap()
            );
        }
    }
}

fn grid_points(bounds: &[(f64, f64)], g: usize) -> Vec<Vec<f64>> {
    let axis =
        |(lo, hi): (f64, f64)| (0..g).map(move |k| lo + (hi - lo) * k as f64 / (g - 1) as f64);
    bounds.iter().fold(vec![Vec::new()], |acc, &b| {
        acc.iter()
            .flat_map(|prefix| axis(b).map(move |x| [prefix.clone(), vec![x]].concat()))
            .collect()
    })
}

#[test]
fn lagrangian_dominates_dual_oracle_on_the_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (p, g) in [
        (example1_source(-3.0, 3.0), 601),
        (example2_source(-2.0, 2.0), 81),
    ] {
        let ncons = p.constraints().len();
        let points = grid_points(&p.coord_bounds().unwrap(), g);
        let po = primal_oracle(&p, g).unwrap();
        for _ in 0..20 {
            let lambdas: Vec<f64> = (0..ncons).map(|_| rng.random_range(0.0..3.0)).collect();
            let m = Multipliers::scalars(&lambdas).unwrap();
            let d = dual_oracle(&p, &m, g).unwrap().value();
            for c in &points {
                let x = p.assignment_from_coords(c);
                if p.in_domain(&x).unwrap() {
                    assert!(lagrangian(&p, &x, &m).unwrap() >= d);
                }
            }
            // the primal grid minimizer is itself a grid point with nonpositive constraints
            assert!(
                d <= po.value + 1e-6,
                "grid dual {d} above grid primal {}",
                po.value
            );
        }
    }
}

// ---------------------------------------------------------------------------
// control

#[test]
fn halving_epsilon_never_shrinks_the_margin() {
    for seed in 0..50u64 {
        let n = 1 + (seed as usize % 4);
        let m = 1 + (seed as usize / 4) % n;
        let clock = if seed % 2 == 0 {
            Clock::ContinuousTime
        } else {
            Clock::DiscreteTime
        };
        let sys = random_stabilizable(n, m, seed, clock).unwrap();
        let eps = default_epsilon(&sys);
        let a = slater_margin(&sys, eps).unwrap();
        let b = slater_margin(&sys, eps / 2.0).unwrap();
        assert!(
            b >= a - 1e-9,
            "seed {seed}: margin {b} at ε/2 below {a} at ε"
        );
    }
}

#[test]
fn general_eigenvalues_match_companion_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        // monic quartic with known roots: two real, one complex pair
        let r1: f64 = rng.random_range(-3.0..3.0);
        let r2: f64 = rng.random_range(-3.0..3.0);
        let re: f64 = rng.random_range(-2.0..2.0);
        let im: f64 = rng.random_range(0.5..2.0);
        let roots = [
            Complex::new(r1, 0.0),
            Complex::new(r2, 0.0),
            Complex::new(re, im),
            Complex::new(re, -im),
        ];
        let mut coeffs = vec![Complex::new(1.0, 0.0)];
        for r in &roots {
            let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
            for (k, c) in coeffs.iter().enumerate() {
                next[k] += c;
                next[k + 1] -= c * r;
            }
            coeffs = next;
        }
        let mut a = DMatrix::zeros(4, 4);
        for k in 0..4 {
            a[(0, k)] = -coeffs[k + 1].re;
        }
        for k in 1..4 {
            a[(k, k - 1)] = 1.0;
        }
        let eigs = eig_general(&a).unwrap();
        assert_eq!(eigs.len(), 4);
        for r in &roots {
            let nearest = eigs
                .iter()
                .map(|l| (l - r).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(
                nearest <= 1e-5 * (1.0 + r.norm()),
                "root {r} missed by {nearest:e}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn nsd_both_ways_only_for_zero(v in prop::collection::vec(prop_oneof![Just(0.0), -1.0f64..1.0], 9)) {
        let m = DMatrix::from_vec(3, 3, v);
        let s = SymMat::new(&m + m.transpose()).unwrap();
        let both = is_nsd(&s, 0.0) && is_nsd(&s.scaled(-1.0), 0.0);
        prop_assert_eq!(both, s.max_abs() == 0.0);
    }

}
