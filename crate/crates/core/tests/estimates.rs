use std::sync::Arc;

use dgtime::dgsolve::{solve_dg, Forcing, Operator, ProblemSpec, SolverPath};
use dgtime::estimate::{aposteriori_profile, collocation_check, ExactSolution, Residual};
use dgtime::operators::{Modulation, NonautonomousModel, OperatorModel};
use dgtime::polyquad::RadauTableau;
use dgtime::reconinterp::reconstruct_solution;
use dgtime::timefun::{NormQuadrature, NormSpec, TimeMesh};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd(d: usize, seed: &[f64]) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |i, j| seed[(i * d + j) % seed.len()]);
    &b * b.transpose() + DMatrix::identity(d, d) * 0.5
}

/// `u(t) = e^{-t} w` with `f = Au - u`.
fn manufactured(op: Operator, w: DVector<f64>) -> (ProblemSpec, ExactSolution) {
    let d = w.len();
    let (wu, wd, wf) = (w.clone(), w.clone(), w.clone());
    let a = op.clone();
    let forcing = Forcing::new(d, move |t| {
        let u = &wf * (-t).exp();
        a.apply_at(t, &u) - u
    });
    let exact = ExactSolution::new(
        Arc::new(move |t: f64| &wu * (-t).exp()),
        Arc::new(move |t: f64| &wd * -(-t).exp()),
    );
    (ProblemSpec::new(op, forcing, w, 1.0).unwrap(), exact)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn residual_never_exceeds_error_norms(
        d in 1usize..5,
        q in 1usize..4,
        slabs in 2usize..10,
        seed in prop::collection::vec(-1.0f64..1.0, 16),
        p in 1.5f64..5.0,
    ) {
        let op = Operator::Autonomous(Arc::new(OperatorModel::from_matrix(spd(d, &seed), "spd").unwrap()));
        let w = DVector::from_fn(d, |i, _| 1.0 + 0.5 * i as f64);
        let (problem, exact) = manufactured(op, w);
        let mesh = TimeMesh::new(1.0, slabs).unwrap();
        let sol = solve_dg(&problem, &mesh, &RadauTableau::new(q).unwrap(), SolverPath::Galerkin).unwrap();
        let recon = reconstruct_solution(&sol).unwrap();
        let resid = Residual::new(&sol, &recon, &problem, NormQuadrature::default()).unwrap();
        let colloc = collocation_check(&sol, &resid).unwrap();
        prop_assert!(colloc.relative() < 1e-9, "collocation defect {:e}", colloc.relative());
        let spec = NormSpec::euclidean(p).unwrap();
        for b in aposteriori_profile(&resid, &exact, &spec).unwrap() {
            prop_assert!(b.lower_ok, "prefix {}: {} > {} + {}", b.prefix, b.resid, b.err_deriv, b.err_a);
        }
    }
}

#[test]
fn constant_modulation_matches_autonomous_solve() {
    let base = Arc::new(OperatorModel::laplacian_1d(6, 1.0).unwrap());
    let scaled = OperatorModel::from_matrix(base.matrix() * 1.5, "scaled").unwrap();
    let frozen = NonautonomousModel::modulated(base, Modulation::constant(1.5), 1.0).unwrap();
    let w = DVector::from_fn(6, |i, _| (i as f64 + 1.0).sin());
    let (pa, _) = manufactured(Operator::Autonomous(Arc::new(scaled)), w.clone());
    let (pn, _) = manufactured(Operator::Nonautonomous(Arc::new(frozen)), w);
    let mesh = TimeMesh::new(1.0, 8).unwrap();
    for q in 1..=3 {
        let t = RadauTableau::new(q).unwrap();
        let a = solve_dg(&pa, &mesh, &t, SolverPath::Galerkin).unwrap();
        let n = solve_dg(&pn, &mesh, &t, SolverPath::Galerkin).unwrap();
        for s in 0..8 {
            let gap = (a.stage_values(s) - n.stage_values(s)).amax();
            assert!(gap < 1e-11, "q={q} slab {s}: {gap:e}");
        }
    }
}

#[test]
fn time_dependent_errors_decrease_at_order_q() {
    let base = Arc::new(OperatorModel::laplacian_1d(10, 1.0).unwrap());
    let model = Arc::new(NonautonomousModel::modulated(base, Modulation::affine(1.0, 0.5), 1.0).unwrap());
    let w = DVector::from_fn(10, |i, _| (std::f64::consts::PI * (i as f64 + 1.0) / 11.0).sin());
    let (problem, exact) = manufactured(Operator::Nonautonomous(model), w);
    let spec = NormSpec::euclidean(2.0).unwrap();
    for q in 1..=3 {
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let mesh = TimeMesh::new(1.0, n).unwrap();
                let sol = solve_dg(&problem, &mesh, &RadauTableau::new(q).unwrap(), SolverPath::Galerkin).unwrap();
                let recon = reconstruct_solution(&sol).unwrap();
                let resid = Residual::new(&sol, &recon, &problem, NormQuadrature::default()).unwrap();
                aposteriori_profile(&resid, &exact, &spec).unwrap().last().unwrap().err_deriv
            })
            .collect();
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > q as f64 - 0.2, "q={q}: rate {rate}");
    }
}
