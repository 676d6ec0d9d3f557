//! The dG(q−1) time stepper for `u' + A(t)u = f`, `u(0) = u₀`.
//!
//! On every slab the Galerkin equations are tested against the Lagrange basis
//! `ℓ_1..ℓ_q` on the Radau nodes, which gives the `qd × qd` system
//!
//! ```text
//! Σ_j (K_ij I + k ∫ℓ_iℓ_j A) U_j = ℓ_i(0) U_n + k ∫ℓ_i f,
//! K_ij = ∫ℓ_j'ℓ_i + ℓ_i(0)ℓ_j(0).
//! ```
//!
//! For constant `A` the same stage values solve the Radau IIA equations with
//! `f(t_ni)` replaced by the weighted averages `f_ni`; that path is kept as an
//! independent cross-check.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{range_error, DgError, Result};
use crate::operators::{NonautonomousModel, OperatorModel};
use crate::polyquad::{GaussRule, RadauTableau};
use crate::timefun::{Continuity, MeshFunction, NodeLayout, SlabBasis, TimeMesh, VectorFn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverPath {
    Galerkin,
    RadauAveraged,
}

impl SolverPath {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverPath::Galerkin => "galerkin",
            SolverPath::RadauAveraged => "radau-averaged",
        }
    }
}

impl fmt::Display for SolverPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Constant or time-dependent spatial operator.
#[derive(Clone, Debug)]
pub enum Operator {
    Autonomous(Arc<OperatorModel>),
    Nonautonomous(Arc<NonautonomousModel>),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Autonomous(a) => a.dim(),
            Operator::Nonautonomous(a) => a.dim(),
        }
    }

    pub fn apply_at(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Operator::Autonomous(a) => a.apply(x),
            Operator::Nonautonomous(a) => a.apply_at(t, x),
        }
    }

    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        match self {
            Operator::Autonomous(a) => a.matrix().clone(),
            Operator::Nonautonomous(a) => a.matrix_at(t),
        }
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self, Operator::Autonomous(_))
    }
}

/// Right-hand side `f`, optionally declared polynomial of a given degree so
/// its integrals can be taken exactly.
#[derive(Clone)]
pub struct Forcing {
    f: VectorFn,
    dim: usize,
    polynomial_degree: Option<usize>,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing")
            .field("dim", &self.dim)
            .field("polynomial_degree", &self.polynomial_degree)
            .finish()
    }
}

impl Forcing {
    pub fn new(dim: usize, f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Forcing {
            f: Arc::new(f),
            dim,
            polynomial_degree: None,
        }
    }

    pub fn from_fn(dim: usize, f: VectorFn) -> Self {
        Forcing {
            f,
            dim,
            polynomial_degree: None,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| DVector::zeros(dim)).with_polynomial_degree(0)
    }

    /// Declares `f` a polynomial of degree `m` in `t`.
    pub fn with_polynomial_degree(mut self, m: usize) -> Self {
        self.polynomial_degree = Some(m);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn polynomial_degree(&self) -> Option<usize> {
        self.polynomial_degree
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        (self.f)(t)
    }

    pub fn function(&self) -> &VectorFn {
        &self.f
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    operator: Operator,
    forcing: Forcing,
    initial: DVector<f64>,
    horizon: f64,
}

impl ProblemSpec {
    pub fn new(operator: Operator, forcing: Forcing, initial: DVector<f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(range_error("horizon T", horizon, "(0, inf)"));
        }
        let d = operator.dim();
        if forcing.dim() != d || initial.len() != d {
            return Err(DgError::Validation(format!(
                "dimension mismatch: operator {d}, forcing {}, initial value {}",
                forcing.dim(),
                initial.len()
            )));
        }
        if let Operator::Nonautonomous(m) = &operator {
            if (m.horizon() - horizon).abs() > 1e-12 * horizon {
                return Err(DgError::Validation(format!(
                    "operator defined up to {} but horizon is {horizon}",
                    m.horizon()
                )));
            }
        }
        Ok(ProblemSpec {
            operator,
            forcing,
            initial,
            horizon,
        })
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    /// Same problem with `f` replaced.
    pub fn with_forcing(&self, forcing: Forcing) -> Result<Self> {
        Self::new(self.operator.clone(), forcing, self.initial.clone(), self.horizon)
    }
}

/// Gauss point counts per slab for the `f` integrals and the `A(t)` integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureSettings {
    pub forcing_points: usize,
    pub operator_points: usize,
}

impl QuadratureSettings {
    /// `q + 4` points for `f` (or the exact count for a declared polynomial)
    /// and `2q` points for `A(t)`.
    pub fn for_problem(q: usize, forcing: &Forcing) -> Self {
        let forcing_points = match forcing.polynomial_degree() {
            Some(m) => (q + m).div_ceil(2).max(1),
            None => q + 4,
        };
        QuadratureSettings {
            forcing_points,
            operator_points: 2 * q,
        }
    }
}

/// Stage values of a dG run with the data needed to audit it.
#[derive(Clone, Debug)]
pub struct DGSolution {
    solution: MeshFunction,
    f_averages: Vec<DMatrix<f64>>,
    path: SolverPath,
    quadrature: QuadratureSettings,
    tableau: RadauTableau,
}

impl DGSolution {
    /// `U`: degree `q - 1`, discontinuous, `U(0) = u₀`.
    pub fn solution(&self) -> &MeshFunction {
        &self.solution
    }

    pub fn into_solution(self) -> MeshFunction {
        self.solution
    }

    /// `d × q` matrix of `U(t_ni)` on slab `n`.
    pub fn stage_values(&self, n: usize) -> &DMatrix<f64> {
        self.solution.nodal(n)
    }

    /// `d × q` matrix of `f_ni` on slab `n`.
    pub fn f_averages(&self, n: usize) -> &DMatrix<f64> {
        &self.f_averages[n]
    }

    pub fn all_f_averages(&self) -> &[DMatrix<f64>] {
        &self.f_averages
    }

    pub fn path(&self) -> SolverPath {
        self.path
    }

    pub fn quadrature(&self) -> QuadratureSettings {
        self.quadrature
    }

    pub fn tableau(&self) -> &RadauTableau {
        &self.tableau
    }

    pub fn mesh(&self) -> &TimeMesh {
        self.solution.mesh()
    }

    /// `U_n`, with `U_0 = u₀`.
    pub fn nodal_value(&self, n: usize) -> DVector<f64> {
        self.solution.left_limit(n)
    }

    /// Writes `f_ni` as CSV: `slab,stage,tau,x0..`.
    pub fn write_f_averages_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.solution.dim();
        let mut header = vec!["slab".to_string(), "stage".into(), "tau".into()];
        header.extend((0..d).map(|r| format!("x{r}")));
        w.write_record(&header)?;
        for (n, block) in self.f_averages.iter().enumerate() {
            for (i, &c) in self.tableau.nodes().iter().enumerate() {
                let mut row = vec![n.to_string(), i.to_string(), c.to_string()];
                row.extend(block.column(i).iter().map(|x| x.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `f_ni = ∫_{J_n} ℓ_ni f / ∫_{J_n} ℓ_ni` for every slab, as `d × q` blocks.
pub fn f_averages(
    forcing: &Forcing,
    mesh: &TimeMesh,
    tableau: &RadauTableau,
    quad: &GaussRule,
) -> Vec<DMatrix<f64>> {
    let q = tableau.stages();
    let d = forcing.dim();
    let basis = tableau.basis();
    let weights = tableau.lagrange_integrals();
    // ℓ_i(τ_g) w_g / b_i
    let factors: Vec<Vec<f64>> = quad
        .nodes()
        .iter()
        .zip(quad.weights())
        .map(|(&tau, &w)| {
            basis
                .eval_all(tau)
                .into_iter()
                .zip(weights)
                .map(|(l, b)| w * l / b)
                .collect()
        })
        .collect();
    (0..mesh.num_slabs())
        .map(|n| {
            let mut block = DMatrix::zeros(d, q);
            for (g, &tau) in quad.nodes().iter().enumerate() {
                let value = forcing.at(mesh.time(n, tau));
                for i in 0..q {
                    block.column_mut(i).axpy(factors[g][i], &value, 1.0);
                }
            }
            block
        })
        .collect()
}

/// `K_ij = ∫ℓ_j'ℓ_i + ℓ_i(0)ℓ_j(0)` and `M_ij = ∫ℓ_iℓ_j` on the reference slab.
fn reference_matrices(tableau: &RadauTableau) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = tableau.stages();
    let basis = tableau.basis();
    let gauss = GaussRule::new(q).expect("q within gauss range");
    let mut stiffness = DMatrix::zeros(q, q);
    let mut mass = DMatrix::zeros(q, q);
    for (&tau, &w) in gauss.nodes().iter().zip(gauss.weights()) {
        let l = basis.eval_all(tau);
        let dl = basis.deriv_all(tau);
        for i in 0..q {
            for j in 0..q {
                stiffness[(i, j)] += w * dl[j] * l[i];
                mass[(i, j)] += w * l[i] * l[j];
            }
        }
    }
    let at_zero = basis.eval_all(0.0);
    for i in 0..q {
        for j in 0..q {
            stiffness[(i, j)] += at_zero[i] * at_zero[j];
        }
    }
    (stiffness, mass)
}

fn check_mesh(problem: &ProblemSpec, mesh: &TimeMesh) -> Result<()> {
    if (mesh.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return Err(DgError::Validation(format!(
            "mesh horizon {} differs from problem horizon {}",
            mesh.horizon(),
            problem.horizon()
        )));
    }
    Ok(())
}

fn stack(block: &DMatrix<f64>) -> DVector<f64> {
    // column-major storage of a d × q block is exactly the stage-major stack
    DVector::from_column_slice(block.as_slice())
}

fn unstack(x: DVector<f64>, d: usize, q: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, q, x.as_slice())
}

fn finish(
    problem: &ProblemSpec,
    mesh: &TimeMesh,
    tableau: &RadauTableau,
    stages: Vec<DMatrix<f64>>,
    f_avg: Vec<DMatrix<f64>>,
    path: SolverPath,
    quadrature: QuadratureSettings,
) -> Result<DGSolution> {
    let basis = Arc::new(SlabBasis::new(NodeLayout::Radau, tableau));
    let solution = MeshFunction::new(
        *mesh,
        basis,
        stages,
        Continuity::Discontinuous,
        problem.initial().clone(),
    )?;
    Ok(DGSolution {
        solution,
        f_averages: f_avg,
        path,
        quadrature,
        tableau: tableau.clone(),
    })
}

/// Solves with default quadrature settings. Time-dependent operators are
/// routed to [`solve_dg_nonautonomous`] on the Galerkin path.
pub fn solve_dg(
    problem: &ProblemSpec,
    mesh: &TimeMesh,
    tableau: &RadauTableau,
    path: SolverPath,
) -> Result<DGSolution> {
    let settings = QuadratureSettings::for_problem(tableau.stages(), problem.forcing());
    solve_dg_with(problem, mesh, tableau, path, settings)
}

pub fn solve_dg_with(
    problem: &ProblemSpec,
    mesh: &TimeMesh,
    tableau: &RadauTableau,
    path: SolverPath,
    settings: QuadratureSettings,
) -> Result<DGSolution> {
    check_mesh(problem, mesh)?;
    let model = match problem.operator() {
        Operator::Autonomous(a) => a.clone(),
        Operator::Nonautonomous(_) => {
            if path != SolverPath::Galerkin {
                return Err(DgError::Validation(
                    "the radau-averaged path needs a constant operator".into(),
                ));
            }
            return solve_nonautonomous(problem, mesh, tableau, settings);
        }
    };
    let q = tableau.stages();
    let d = problem.dim();
    let k = mesh.step();
    let f_quad = GaussRule::new(settings.forcing_points)?;
    let f_avg = f_averages(problem.forcing(), mesh, tableau, &f_quad);
    let b = tableau.weights();

    let (lhs_mass, lhs_coupling, left_weights) = match path {
        SolverPath::Galerkin => {
            let (stiffness, mass) = reference_matrices(tableau);
            (stiffness, mass, tableau.basis().eval_all(0.0))
        }
        SolverPath::RadauAveraged => (DMatrix::identity(q, q), tableau.matrix().clone(), vec![1.0; q]),
    };

    let mut stages = Vec::with_capacity(mesh.num_slabs());
    let mut previous = problem.initial().clone();
    for (n, avg) in f_avg.iter().enumerate() {
        let mut rhs = DMatrix::zeros(d, q);
        match path {
            SolverPath::Galerkin => {
                for i in 0..q {
                    let mut col = rhs.column_mut(i);
                    col.axpy(left_weights[i], &previous, 0.0);
                    col.axpy(k * b[i], &avg.column(i), 1.0);
                }
            }
            SolverPath::RadauAveraged => {
                let forced = avg * tableau.matrix().transpose();
                for i in 0..q {
                    let mut col = rhs.column_mut(i);
                    col.copy_from(&previous);
                    col.axpy(k, &forced.column(i), 1.0);
                }
            }
        }
        let x = model
            .solve_block(&lhs_mass, &lhs_coupling, k, &stack(&rhs))
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or(DgError::StepFailure { slab: n })?;
        let block = unstack(x, d, q);
        previous = block.column(q - 1).into_owned();
        stages.push(block);
    }
    finish(problem, mesh, tableau, stages, f_avg, path, settings)
}

/// Galerkin solve for `A(t)`, with `∫ℓ_iℓ_j A(t)` taken by `quad_a`.
pub fn solve_dg_nonautonomous(
    problem: &ProblemSpec,
    mesh: &TimeMesh,
    tableau: &RadauTableau,
    quad_a: &GaussRule,
) -> Result<DGSolution> {
    check_mesh(problem, mesh)?;
    let mut settings = QuadratureSettings::for_problem(tableau.stages(), problem.forcing());
    settings.operator_points = quad_a.len();
    solve_nonautonomous(problem, mesh, tableau, settings)
}

fn solve_nonautonomous(
    problem: &ProblemSpec,
    mesh: &TimeMesh,
    tableau: &RadauTableau,
    settings: QuadratureSettings,
) -> Result<DGSolution> {
    let q = tableau.stages();
    let d = problem.dim();
    let k = mesh.step();
    let f_quad = GaussRule::new(settings.forcing_points)?;
    let a_quad = GaussRule::new(settings.operator_points)?;
    let f_avg = f_averages(problem.forcing(), mesh, tableau, &f_quad);
    let b = tableau.weights();
    let (stiffness, _) = reference_matrices(tableau);
    let left_weights = tableau.basis().eval_all(0.0);
    let products: Vec<Vec<f64>> = a_quad
        .nodes()
        .iter()
        .map(|&tau| {
            let l = tableau.basis().eval_all(tau);
            (0..q * q).map(|ij| l[ij / q] * l[ij % q]).collect()
        })
        .collect();

    let mut stages = Vec::with_capacity(mesh.num_slabs());
    let mut previous = problem.initial().clone();
    for (n, avg) in f_avg.iter().enumerate() {
        let mut system = DMatrix::zeros(q * d, q * d);
        for i in 0..q {
            for j in 0..q {
                for r in 0..d {
                    system[(i * d + r, j * d + r)] = stiffness[(i, j)];
                }
            }
        }
        for (g, (&tau, &w)) in a_quad.nodes().iter().zip(a_quad.weights()).enumerate() {
            let a = problem.operator().matrix_at(mesh.time(n, tau));
            for i in 0..q {
                for j in 0..q {
                    let mut block = system.view_mut((i * d, j * d), (d, d));
                    block += &a * (k * w * products[g][i * q + j]);
                }
            }
        }
        let mut rhs = DMatrix::zeros(d, q);
        for i in 0..q {
            let mut col = rhs.column_mut(i);
            col.axpy(left_weights[i], &previous, 0.0);
            col.axpy(k * b[i], &avg.column(i), 1.0);
        }
        let x = system
            .lu()
            .solve(&stack(&rhs))
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or(DgError::StepFailure { slab: n })?;
        let block = unstack(x, d, q);
        previous = block.column(q - 1).into_owned();
        stages.push(block);
    }
    finish(problem, mesh, tableau, stages, f_avg, SolverPath::Galerkin, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Modulation;
    use approx::assert_abs_diff_eq;

    fn scalar_model(lambda: f64) -> Arc<OperatorModel> {
        Arc::new(OperatorModel::from_matrix(DMatrix::from_element(1, 1, lambda), "scalar").unwrap())
    }

    fn averages_on_reference(q: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Vec<f64> {
        let mesh = TimeMesh::new(1.0, 1).unwrap();
        let forcing = Forcing::new(1, move |t| DVector::from_element(1, f(t)));
        let tableau = RadauTableau::new(q).unwrap();
        let quad = GaussRule::new(q + 4).unwrap();
        f_averages(&forcing, &mesh, &tableau, &quad)[0].row(0).iter().copied().collect()
    }

    #[test]
    fn averages_q1_is_slab_mean() {
        let avg = averages_on_reference(1, |t| 3.0 * t * t + 1.0);
        assert_abs_diff_eq!(avg[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn averages_q2_linear_and_quadratic() {
        let lin = averages_on_reference(2, |t| t);
        assert_abs_diff_eq!(lin[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lin[1], 1.0, epsilon = 1e-14);
        let quad = averages_on_reference(2, |t| t * t);
        assert_abs_diff_eq!(quad[0], 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn declared_polynomial_uses_exact_rule() {
        let f = Forcing::zero(2).with_polynomial_degree(5);
        assert_eq!(QuadratureSettings::for_problem(3, &f).forcing_points, 4);
        let g = Forcing::new(2, |_| DVector::zeros(2));
        assert_eq!(QuadratureSettings::for_problem(3, &g).forcing_points, 7);
        assert_eq!(QuadratureSettings::for_problem(3, &g).operator_points, 6);
    }

    #[test]
    fn backward_euler_recursion() {
        let lambda = 3.0;
        let problem = ProblemSpec::new(
            Operator::Autonomous(scalar_model(lambda)),
            Forcing::zero(1),
            DVector::from_element(1, 1.0),
            1.0,
        )
        .unwrap();
        let mesh = TimeMesh::new(1.0, 10).unwrap();
        let tableau = RadauTableau::new(1).unwrap();
        for path in [SolverPath::Galerkin, SolverPath::RadauAveraged] {
            let sol = solve_dg(&problem, &mesh, &tableau, path).unwrap();
            for n in 0..=10 {
                let expect = (1.0 + 0.1 * lambda).powi(-(n as i32));
                assert_abs_diff_eq!(sol.nodal_value(n)[0], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn galerkin_matches_radau_averaged() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let model = Arc::new(OperatorModel::from_matrix(a, "spd").unwrap());
        let forcing = Forcing::new(3, |t| DVector::from_vec(vec![t.sin(), (2.0 * t).cos(), t.exp()]));
        let problem = ProblemSpec::new(
            Operator::Autonomous(model),
            forcing,
            DVector::from_vec(vec![1.0, -1.0, 0.5]),
            1.0,
        )
        .unwrap();
        let mesh = TimeMesh::new(1.0, 7).unwrap();
        let tableau = RadauTableau::new(2).unwrap();
        let g = solve_dg(&problem, &mesh, &tableau, SolverPath::Galerkin).unwrap();
        let r = solve_dg(&problem, &mesh, &tableau, SolverPath::RadauAveraged).unwrap();
        for n in 0..7 {
            let diff = (g.stage_values(n) - r.stage_values(n)).amax();
            assert!(diff <= 1e-10 * r.stage_values(n).amax(), "slab {n}: {diff:e}");
        }
    }

    #[test]
    fn constant_family_matches_autonomous_solve() {
        let base = Arc::new(OperatorModel::laplacian_1d(4, 1.0).unwrap());
        let family = Arc::new(NonautonomousModel::frozen(base.clone(), 1.0).unwrap());
        let forcing = Forcing::new(4, |t| DVector::from_fn(4, |r, _| (t + r as f64).sin()));
        let u0 = DVector::from_fn(4, |r, _| r as f64);
        let auto = ProblemSpec::new(Operator::Autonomous(base), forcing.clone(), u0.clone(), 1.0).unwrap();
        let non = ProblemSpec::new(Operator::Nonautonomous(family), forcing, u0, 1.0).unwrap();
        let mesh = TimeMesh::new(1.0, 5).unwrap();
        let tableau = RadauTableau::new(3).unwrap();
        let a = solve_dg(&auto, &mesh, &tableau, SolverPath::Galerkin).unwrap();
        let b = solve_dg_nonautonomous(&non, &mesh, &tableau, &GaussRule::new(6).unwrap()).unwrap();
        for n in 0..5 {
            assert!((a.stage_values(n) - b.stage_values(n)).amax() <= 1e-11 * a.stage_values(n).amax());
        }
    }

    #[test]
    fn nonautonomous_single_step_q1() {
        // A(t) = (1 + t/2)·2, one step on (0, k]
        let base = scalar_model(2.0);
        let family = Arc::new(NonautonomousModel::modulated(base, Modulation::affine(1.0, 0.5), 0.4).unwrap());
        let forcing = Forcing::new(1, |t| DVector::from_element(1, 1.0 + t));
        let problem = ProblemSpec::new(
            Operator::Nonautonomous(family),
            forcing,
            DVector::from_element(1, 1.5),
            0.4,
        )
        .unwrap();
        let mesh = TimeMesh::new(0.4, 1).unwrap();
        let tableau = RadauTableau::new(1).unwrap();
        let sol = solve_dg_nonautonomous(&problem, &mesh, &tableau, &GaussRule::new(2).unwrap()).unwrap();
        let k: f64 = 0.4;
        let a_bar = 2.0 * (k + k * k / 4.0) / k;
        let f_bar = (k + k * k / 2.0) / k;
        let expect = (1.5 + k * f_bar) / (1.0 + k * a_bar);
        assert_abs_diff_eq!(sol.nodal_value(1)[0], expect, epsilon = 1e-14);
    }

    #[test]
    fn radau_path_rejects_time_dependent_operator() {
        let base = Arc::new(OperatorModel::laplacian_1d(2, 1.0).unwrap());
        let family = Arc::new(NonautonomousModel::frozen(base, 1.0).unwrap());
        let problem =
            ProblemSpec::new(Operator::Nonautonomous(family), Forcing::zero(2), DVector::zeros(2), 1.0).unwrap();
        let mesh = TimeMesh::new(1.0, 2).unwrap();
        let tableau = RadauTableau::new(2).unwrap();
        assert!(solve_dg(&problem, &mesh, &tableau, SolverPath::RadauAveraged).is_err());
        assert!(solve_dg(&problem, &mesh, &tableau, SolverPath::Galerkin).is_ok());
    }

    #[test]
    fn mismatches_are_rejected() {
        let model = Operator::Autonomous(scalar_model(1.0));
        assert!(ProblemSpec::new(model.clone(), Forcing::zero(2), DVector::zeros(1), 1.0).is_err());
        assert!(ProblemSpec::new(model.clone(), Forcing::zero(1), DVector::zeros(1), 0.0).is_err());
        let p = ProblemSpec::new(model, Forcing::zero(1), DVector::zeros(1), 1.0).unwrap();
        let mesh = TimeMesh::new(2.0, 2).unwrap();
        let tableau = RadauTableau::new(1).unwrap();
        assert!(matches!(
            solve_dg(&p, &mesh, &tableau, SolverPath::Galerkin),
            Err(DgError::Validation(_))
        ));
    }

    #[test]
    fn f_average_csv_layout() {
        let problem = ProblemSpec::new(
            Operator::Autonomous(scalar_model(1.0)),
            Forcing::new(1, |t| DVector::from_element(1, t)).with_polynomial_degree(1),
            DVector::zeros(1),
            1.0,
        )
        .unwrap();
        let mesh = TimeMesh::new(1.0, 1).unwrap();
        let sol = solve_dg(&problem, &mesh, &RadauTableau::new(1).unwrap(), SolverPath::Galerkin).unwrap();
        let mut buf = Vec::new();
        sol.write_f_averages_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "slab,stage,tau,x0\n0,0,1,0.5\n");
    }
}
