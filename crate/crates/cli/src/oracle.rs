//! Cross-checks of the two autonomous solver paths and exactness cases.

use std::sync::Arc;

use dgtime::dgsolve::{solve_dg, solve_dg_with, DGSolution, Forcing, Operator, ProblemSpec, QuadratureSettings, SolverPath};
use dgtime::estimate::Residual;
use dgtime::operators::OperatorModel;
use dgtime::polyquad::RadauTableau;
use dgtime::reconinterp::reconstruct_solution;
use dgtime::timefun::{NormQuadrature, NormSpec, TimeMesh};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Purpose, RunConfig};
use crate::error::Result;
use crate::problems::random_trig_forcing;
use crate::report::PropertyCheck;

pub const ORACLE_TRIALS: usize = 50;
pub const PATH_TOL: f64 = 1e-10;
pub const POLYNOMIAL_TOL: f64 = 1e-10;
pub const RECURSION_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-10;

/// One random autonomous test problem.
#[derive(Clone, Debug)]
pub struct RandomProblem {
    pub problem: ProblemSpec,
    pub q: usize,
    pub slabs: usize,
    pub nonnormal: bool,
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let shift = rng.random_range(0.1..1.0);
    &b * b.transpose() + DMatrix::identity(d, d) * shift
}

/// SPD matrix plus, for the nonnormal kind, a random skew part. Either way
/// the spectrum lies in the open right half-plane.
pub fn random_operator(rng: &mut ChaCha8Rng, d: usize, nonnormal: bool) -> Result<OperatorModel> {
    let mut a = random_spd(rng, d);
    if nonnormal {
        let c = DMatrix::from_fn(d, d, |_, _| rng.random_range(-3.0..3.0));
        a += &c - c.transpose();
    }
    let label = if nonnormal { "random-nonnormal" } else { "random-spd" };
    Ok(OperatorModel::from_matrix(a, label)?)
}

pub fn random_problem(rng: &mut ChaCha8Rng, q: usize) -> Result<RandomProblem> {
    let d = rng.random_range(1..=8);
    let nonnormal = d > 1 && rng.random_bool(0.5);
    let op = random_operator(rng, d, nonnormal)?;
    let horizon = rng.random_range(0.5..2.0);
    let slabs = rng.random_range(2..=12);
    let u0 = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let forcing = random_trig_forcing(d, horizon, 3, rng.random());
    let problem = ProblemSpec::new(Operator::Autonomous(Arc::new(op)), forcing, u0, horizon)?;
    Ok(RandomProblem { problem, q, slabs, nonnormal })
}

/// `max |U_a - U_b| / max |U_b|` over all stage values.
pub fn relative_stage_gap(a: &DGSolution, b: &DGSolution) -> f64 {
    let mut gap: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for n in 0..a.mesh().num_slabs() {
        gap = gap.max((a.stage_values(n) - b.stage_values(n)).amax());
        scale = scale.max(b.stage_values(n).amax());
    }
    if scale > 0.0 {
        gap / scale
    } else {
        gap
    }
}

/// Largest relative stage gap between the Galerkin and Radau-averaged paths.
pub fn path_gap(rp: &RandomProblem) -> Result<f64> {
    let mesh = TimeMesh::new(rp.problem.horizon(), rp.slabs)?;
    let tableau = RadauTableau::new(rp.q)?;
    let settings = QuadratureSettings::for_problem(rp.q, rp.problem.forcing());
    let g = solve_dg_with(&rp.problem, &mesh, &tableau, SolverPath::Galerkin, settings)?;
    let r = solve_dg_with(&rp.problem, &mesh, &tableau, SolverPath::RadauAveraged, settings)?;
    Ok(relative_stage_gap(&g, &r))
}

/// Exact solution `u(t) = Σ_j c_j t^j` of degree `q - 1` and the matching
/// polynomial forcing `u' + Au`.
pub struct PolynomialCase {
    pub problem: ProblemSpec,
    pub coeffs: Vec<DVector<f64>>,
}

impl PolynomialCase {
    pub fn new(rng: &mut ChaCha8Rng, q: usize, d: usize) -> Result<Self> {
        let op = Arc::new(random_operator(rng, d, d > 1)?);
        let coeffs: Vec<DVector<f64>> = (0..q)
            .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let c = coeffs.clone();
        let a = op.clone();
        let forcing = Forcing::new(d, move |t| {
            let u = poly_value(&c, t);
            let du = poly_deriv(&c, t);
            du + a.apply(&u)
        })
        .with_polynomial_degree(q - 1);
        let problem = ProblemSpec::new(Operator::Autonomous(op), forcing, coeffs[0].clone(), 1.0)?;
        Ok(PolynomialCase { problem, coeffs })
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        poly_value(&self.coeffs, t)
    }
}

fn poly_value(c: &[DVector<f64>], t: f64) -> DVector<f64> {
    c.iter().rev().fold(DVector::zeros(c[0].len()), |acc, cj| acc * t + cj)
}

fn poly_deriv(c: &[DVector<f64>], t: f64) -> DVector<f64> {
    let mut acc = DVector::zeros(c[0].len());
    for (j, cj) in c.iter().enumerate().skip(1).rev() {
        acc = acc * t + cj * j as f64;
    }
    acc
}

/// Largest relative nodal error and relative residual `‖R‖_{L²}/‖f‖_{L²}` for
/// a polynomial exact solution.
pub fn polynomial_exactness(case: &PolynomialCase, q: usize, slabs: usize) -> Result<(f64, f64)> {
    let mesh = TimeMesh::new(case.problem.horizon(), slabs)?;
    let tableau = RadauTableau::new(q)?;
    let sol = solve_dg(&case.problem, &mesh, &tableau, SolverPath::Galerkin)?;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for n in 0..slabs {
        for (i, &c) in tableau.nodes().iter().enumerate() {
            let u = case.value(mesh.time(n, c));
            err = err.max((sol.stage_values(n).column(i) - &u).amax());
            scale = scale.max(u.amax());
        }
    }
    let recon = reconstruct_solution(&sol)?;
    let quad = NormQuadrature::default();
    let resid = Residual::new(&sol, &recon, &case.problem, quad.clone())?;
    let spec = NormSpec::euclidean(2.0)?;
    let r = resid.norm(&spec, slabs)?;
    let f = dgtime::timefun::SampledNorms::sample(&mesh, slabs, &quad, spec.x_norm(), &|s: usize, tau: f64| {
        case.problem.forcing().at(mesh.time(s, tau))
    })
    .prefix_norm(slabs, 2.0);
    Ok((err / scale.max(f64::MIN_POSITIVE), r / f.max(f64::MIN_POSITIVE)))
}

/// `max_n |U_n - (1 + kλ)^{-n}|` for `u' + λu = 0`, `u(0) = 1`, with `q = 1`.
pub fn scalar_recursion_gap(lambda: f64, horizon: f64, slabs: usize) -> Result<f64> {
    let op = OperatorModel::from_matrix(DMatrix::from_element(1, 1, lambda), "scalar")?;
    let problem = ProblemSpec::new(
        Operator::Autonomous(Arc::new(op)),
        Forcing::zero(1),
        DVector::from_element(1, 1.0),
        horizon,
    )?;
    let mesh = TimeMesh::new(horizon, slabs)?;
    let sol = solve_dg(&problem, &mesh, &RadauTableau::new(1)?, SolverPath::Galerkin)?;
    let k = mesh.step();
    Ok((0..=slabs)
        .map(|n| (sol.nodal_value(n)[0] - (1.0 + k * lambda).powi(-(n as i32))).abs())
        .fold(0.0, f64::max))
}

/// Runs the path-equivalence trials and the exactness cases.
pub fn run_oracle(cfg: &RunConfig) -> Result<Vec<PropertyCheck>> {
    cfg.validate(Purpose::Oracle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.output.seed);
    let qs = &cfg.solver.q;
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    let mut worst_case = String::new();
    let mut failures = Vec::new();
    let mut nonnormal = 0;
    for trial in 0..ORACLE_TRIALS {
        let q = qs[trial % qs.len()];
        let rp = random_problem(&mut rng, q)?;
        nonnormal += usize::from(rp.nonnormal);
        match path_gap(&rp) {
            Ok(g) => {
                if !(g <= worst) {
                    worst = g;
                    worst_case = format!("trial {trial} (q={q}, d={}, N={})", rp.problem.dim(), rp.slabs);
                }
            }
            Err(e) => failures.push(format!("trial {trial}: {e}")),
        }
    }
    checks.push(PropertyCheck::new(
        "galerkin vs radau-averaged",
        failures.is_empty() && worst <= PATH_TOL,
        if failures.is_empty() {
            format!(
                "{ORACLE_TRIALS} problems ({nonnormal} nonnormal), max relative stage gap {worst:.2e} at {worst_case}"
            )
        } else {
            failures.join("; ")
        },
    ));

    for &q in qs {
        let case = PolynomialCase::new(&mut rng, q, 3)?;
        let (err, resid) = polynomial_exactness(&case, q, 5)?;
        checks.push(PropertyCheck::new(
            format!("polynomial reproduction q={q}"),
            err <= POLYNOMIAL_TOL,
            format!("degree {} solution, max relative stage error {err:.2e}", q - 1),
        ));
        checks.push(PropertyCheck::new(
            format!("vanishing residual q={q}"),
            resid <= RESIDUAL_TOL,
            format!("|R| / |f| = {resid:.2e}"),
        ));
    }

    let mut gap: f64 = 0.0;
    for (lambda, slabs) in [(1.0, 10), (2.5, 16), (40.0, 8), (0.3, 64)] {
        gap = gap.max(scalar_recursion_gap(lambda, 1.0, slabs)?);
    }
    checks.push(PropertyCheck::new(
        "dG(0) recursion",
        gap <= RECURSION_TOL,
        format!("max |U_n - (1+k lambda)^-n| = {gap:.2e}"),
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_helpers() {
        let c = vec![DVector::from_element(1, 1.0), DVector::from_element(1, 2.0), DVector::from_element(1, 3.0)];
        assert_eq!(poly_value(&c, 2.0)[0], 1.0 + 4.0 + 12.0);
        assert_eq!(poly_deriv(&c, 2.0)[0], 2.0 + 12.0);
    }

    #[test]
    fn random_operators_are_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..6 {
            let a = random_operator(&mut rng, d, d > 1).unwrap();
            assert!(a.spectrum().min_real > 0.0);
        }
    }
}
