use std::sync::Arc;

use dgtime::dgsolve::{solve_dg, Forcing, Operator, ProblemSpec, SolverPath};
use dgtime::operators::OperatorModel;
use dgtime::polyquad::{GaussRule, RadauTableau};
use dgtime::reconinterp::{ortho_interpolate_with, reconstruct};
use dgtime::timefun::{
    discrete_lp_norm, lp_norm, Continuity, MeshFunction, NormQuadrature, NormSpec, SlabBasis, TimeMesh,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(32)
}

fn matrix(d: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| entries[(i * d + j) % entries.len()])
}

/// `BBᵀ + shift·I`, plus `C - Cᵀ` when `skew` is set.
fn operator(d: usize, entries: &[f64], shift: f64, skew: bool) -> OperatorModel {
    let b = matrix(d, entries);
    let mut a = &b * b.transpose() + DMatrix::identity(d, d) * shift;
    if skew {
        let c = matrix(d, &entries.iter().rev().copied().collect::<Vec<_>>());
        a += &c - c.transpose();
    }
    OperatorModel::from_matrix(a, "test").unwrap()
}

fn sine_forcing(d: usize, freq: f64) -> Forcing {
    Forcing::new(d, move |t| DVector::from_fn(d, |r, _| ((r as f64 + 1.0) * freq * t).sin()))
}

fn problem(op: OperatorModel, forcing: Forcing, u0: DVector<f64>, horizon: f64) -> ProblemSpec {
    ProblemSpec::new(Operator::Autonomous(Arc::new(op)), forcing, u0, horizon).unwrap()
}

fn entries() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 16)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn gauss_rule_is_exact_up_to_degree_2n_minus_1(n in 1usize..12, seed in 0usize..1000) {
        let rule = GaussRule::new(n).unwrap();
        let degree = seed % (2 * n);
        let exact = 1.0 / (degree as f64 + 1.0);
        let got = rule.integrate_unit(|t| t.powi(degree as i32));
        prop_assert!((got - exact).abs() <= 1e-13, "n={n} degree={degree}: {got} vs {exact}");
    }

    #[test]
    fn radau_matrix_integrates_stage_polynomials(q in 1usize..=8) {
        // Σ_j a_ij c_j^{m-1} = c_i^m / m for m = 1..q.
        let t = RadauTableau::new(q).unwrap();
        let c = t.nodes();
        for i in 0..q {
            for m in 1..=q {
                let lhs: f64 = (0..q).map(|j| t.matrix()[(i, j)] * c[j].powi(m as i32 - 1)).sum();
                prop_assert!((lhs - c[i].powi(m as i32) / m as f64).abs() < 1e-11);
            }
        }
        prop_assert!((c[q - 1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn block_solve_matches_dense_solve(d in 1usize..5, q in 1usize..4, e in entries(), k in 0.01f64..1.0) {
        let op = operator(d, &e, 0.5, true);
        let t = RadauTableau::new(q).unwrap();
        let mass = DMatrix::identity(q, q);
        let rhs = DVector::from_fn(q * d, |i, _| (i as f64 * 0.7).cos());
        let x = op.solve_block(&mass, t.matrix(), k, &rhs).unwrap();
        let residual = op.block_matrix(&mass, t.matrix(), k) * &x - &rhs;
        prop_assert!(residual.amax() < 1e-10 * (1.0 + x.amax()));
    }

    #[test]
    fn solver_paths_agree(
        d in 1usize..5,
        q in 1usize..4,
        slabs in 1usize..10,
        e in entries(),
        skew in any::<bool>(),
        freq in 0.5f64..6.0,
    ) {
        let p = problem(operator(d, &e, 0.3, skew), sine_forcing(d, freq), DVector::from_element(d, 1.0), 1.0);
        let mesh = TimeMesh::new(1.0, slabs).unwrap();
        let t = RadauTableau::new(q).unwrap();
        let g = solve_dg(&p, &mesh, &t, SolverPath::Galerkin).unwrap();
        let r = solve_dg(&p, &mesh, &t, SolverPath::RadauAveraged).unwrap();
        for n in 0..slabs {
            let gap = (g.stage_values(n) - r.stage_values(n)).amax();
            prop_assert!(gap <= 1e-10 * (1.0 + r.stage_values(n).amax()), "slab {n}: {gap:e}");
        }
    }

    #[test]
    fn later_forcing_does_not_change_earlier_slabs(
        d in 1usize..4,
        q in 1usize..4,
        e in entries(),
        cut in 1usize..7,
    ) {
        let slabs = 8;
        let mesh = TimeMesh::new(1.0, slabs).unwrap();
        let t_cut = mesh.point(cut);
        let base = Forcing::new(d, move |t| DVector::from_element(d, t.cos()));
        let bumped = Forcing::new(d, move |t| {
            let bump = if t > t_cut { 5.0 * (t - t_cut) } else { 0.0 };
            DVector::from_element(d, t.cos() + bump)
        });
        let a = problem(operator(d, &e, 0.3, false), base, DVector::zeros(d), 1.0);
        let b = problem(operator(d, &e, 0.3, false), bumped, DVector::zeros(d), 1.0);
        let t = RadauTableau::new(q).unwrap();
        let ua = solve_dg(&a, &mesh, &t, SolverPath::Galerkin).unwrap();
        let ub = solve_dg(&b, &mesh, &t, SolverPath::Galerkin).unwrap();
        for n in 0..cut {
            prop_assert_eq!(ua.stage_values(n), ub.stage_values(n));
        }
        prop_assert!(ua.stage_values(slabs - 1) != ub.stage_values(slabs - 1));
    }

    #[test]
    fn homogeneous_symmetric_problems_dissipate(
        d in 1usize..6,
        q in 1usize..4,
        slabs in 1usize..12,
        e in entries(),
        horizon in 0.1f64..5.0,
    ) {
        let u0 = DVector::from_fn(d, |i, _| 1.0 - 0.3 * i as f64);
        let p = problem(operator(d, &e, 0.1, false), Forcing::zero(d), u0, horizon);
        let mesh = TimeMesh::new(horizon, slabs).unwrap();
        let sol = solve_dg(&p, &mesh, &RadauTableau::new(q).unwrap(), SolverPath::Galerkin).unwrap();
        for n in 0..slabs {
            prop_assert!(sol.nodal_value(n + 1).norm() <= sol.nodal_value(n).norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn polynomial_solutions_are_reproduced(
        d in 1usize..4,
        q in 1usize..5,
        slabs in 1usize..6,
        e in entries(),
        coeffs in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        // u(t) = Σ_j c_j t^j, degree q - 1, componentwise.
        let c = coeffs.clone();
        let u = move |t: f64| DVector::from_fn(d, |r, _| (0..q).map(|j| c[(r * q + j) % c.len()] * t.powi(j as i32)).sum());
        let c = coeffs.clone();
        let du = move |t: f64| {
            DVector::from_fn(d, |r, _| {
                (1..q).map(|j| j as f64 * c[(r * q + j) % c.len()] * t.powi(j as i32 - 1)).sum()
            })
        };
        let op = Arc::new(operator(d, &e, 0.3, d > 1));
        let a = op.clone();
        let uf = u.clone();
        let forcing = Forcing::new(d, move |t| du(t) + a.apply(&uf(t))).with_polynomial_degree(q - 1);
        let p = ProblemSpec::new(Operator::Autonomous(op), forcing, u(0.0), 1.0).unwrap();
        let mesh = TimeMesh::new(1.0, slabs).unwrap();
        let t = RadauTableau::new(q).unwrap();
        let sol = solve_dg(&p, &mesh, &t, SolverPath::Galerkin).unwrap();
        for n in 0..slabs {
            for (i, &c) in t.nodes().iter().enumerate() {
                let gap = (sol.stage_values(n).column(i) - u(mesh.time(n, c))).amax();
                prop_assert!(gap < 1e-10, "slab {n} stage {i}: {gap:e}");
            }
        }
    }

    #[test]
    fn reconstruction_interpolates_and_is_continuous(
        d in 1usize..4,
        q in 1usize..5,
        slabs in 1usize..8,
        values in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let mesh = TimeMesh::new(1.0, slabs).unwrap();
        let blocks: Vec<DMatrix<f64>> = (0..slabs)
            .map(|n| DMatrix::from_fn(d, q, |r, j| values[(n * q * d + j * d + r) % values.len()]))
            .collect();
        let w0 = DVector::from_fn(d, |r, _| values[(r + 7) % values.len()]);
        let w = MeshFunction::new(mesh, SlabBasis::radau(q).unwrap(), blocks, Continuity::Discontinuous, w0.clone()).unwrap();
        let hat = reconstruct(&w, &w0).unwrap().into_hat();
        let tableau = RadauTableau::new(q).unwrap();
        for n in 0..slabs {
            prop_assert!((hat.eval_slab(n, 0.0) - w.left_limit(n)).amax() < 1e-12);
            for &c in tableau.nodes() {
                prop_assert!((hat.eval_slab(n, c) - w.eval_slab(n, c)).amax() < 1e-12);
            }
            if n > 0 {
                prop_assert!((hat.eval_slab(n, 0.0) - hat.eval_slab(n - 1, 1.0)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn ortho_interpolant_conditions(q in 1usize..5, slabs in 1usize..8, a in 0.5f64..5.0, b in -1.0f64..1.0) {
        let u = move |t: f64| DVector::from_vec(vec![(a * t + b).sin(), (b * t).exp()]);
        let mesh = TimeMesh::new(1.0, slabs).unwrap();
        let gauss = GaussRule::new(20).unwrap();
        let tilde = ortho_interpolate_with(&u, &mesh, q, &gauss).unwrap().into_tilde();
        for n in 0..slabs {
            prop_assert!((tilde.eval_slab(n, 1.0) - u(mesh.point(n + 1))).amax() < 1e-12);
            for j in 0..q.saturating_sub(1) {
                let mut moment = DVector::zeros(2);
                for (&tau, &w) in gauss.nodes().iter().zip(gauss.weights()) {
                    moment += (u(mesh.time(n, tau)) - tilde.eval_slab(n, tau)) * (w * tau.powi(j as i32));
                }
                prop_assert!(moment.amax() < 1e-10, "slab {n} moment {j}: {:e}", moment.amax());
            }
        }
    }

    #[test]
    fn norms_are_homogeneous_and_subadditive(
        q in 1usize..4,
        slabs in 1usize..8,
        p in 1.5f64..6.0,
        scale in 0.1f64..10.0,
        values in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let mesh = TimeMesh::new(1.0, slabs).unwrap();
        let build = |offset: usize| {
            let blocks = (0..slabs)
                .map(|n| DMatrix::from_fn(2, q, |r, j| values[(offset + n * q * 2 + j * 2 + r) % values.len()]))
                .collect();
            MeshFunction::new(mesh, SlabBasis::radau(q).unwrap(), blocks, Continuity::Discontinuous, DVector::zeros(2)).unwrap()
        };
        let v = build(0);
        let w = build(13);
        let spec = NormSpec::euclidean(p).unwrap();
        let quad = NormQuadrature::default();
        let tableau = RadauTableau::new(q).unwrap();
        let nv = lp_norm(&v, &mesh, &spec, slabs, &quad).unwrap();
        let nw = lp_norm(&w, &mesh, &spec, slabs, &quad).unwrap();
        let sum = v.combine(1.0, &w, 1.0).unwrap();
        let scaled = v.map_linear(|x| x * scale);
        prop_assert!(lp_norm(&sum, &mesh, &spec, slabs, &quad).unwrap() <= (nv + nw) * (1.0 + 1e-9));
        prop_assert!((lp_norm(&scaled, &mesh, &spec, slabs, &quad).unwrap() - scale * nv).abs() <= 1e-9 * scale * nv);
        let mut prev = 0.0;
        for m in 1..=slabs {
            let dn = discrete_lp_norm(&v, &tableau, &spec, m).unwrap();
            prop_assert!(dn >= prev);
            prev = dn;
        }
    }
}
