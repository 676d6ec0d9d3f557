//! Residual of the reconstruction, a posteriori error quantities and
//! maximal-regularity diagnostics.
//!
//! The residual is `R = Û' + A(t)Û - f`. With the exact solution `u` the error
//! `ê = u - Û` satisfies `ê' + A(t)ê = -R`, so
//! `‖R‖ ≤ ‖ê'‖ + ‖A(·)ê‖` on every prefix `(0, t_m]`; the ratio of the two sides
//! is the reported effectivity.

use std::io::Write;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::dgsolve::{DGSolution, Operator, ProblemSpec};
use crate::error::{DgError, Result};
use crate::polyquad::RadauTableau;
use crate::reconinterp::Reconstruction;
use crate::timefun::{
    backward_difference, MeshFunction, NormQuadrature, NormSpec, SampledNorms, SlabFunction,
    TimeMesh, VectorFn, XNorm,
};

/// Relative slack in the lower bound `‖R‖ ≤ ‖ê'‖ + ‖A ê‖`.
pub const LOWER_BOUND_SLACK: f64 = 1e-6;

/// Norms below this multiple of the solution scale count as zero when
/// deciding whether the effectivity is the degenerate `0/0`.
pub const ZERO_FLOOR: f64 = 1e-10;

/// An exact solution with its time derivative.
#[derive(Clone)]
pub struct ExactSolution {
    u: VectorFn,
    du: VectorFn,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution")
    }
}

impl ExactSolution {
    pub fn new(u: VectorFn, du: VectorFn) -> Self {
        ExactSolution { u, du }
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        (self.u)(t)
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        (self.du)(t)
    }

    pub fn value_fn(&self) -> &VectorFn {
        &self.u
    }
}

type SampleCache = Mutex<Vec<(XNorm, Arc<SampledNorms>)>>;

fn cached_samples(
    cache: &SampleCache,
    x_norm: &XNorm,
    build: impl FnOnce() -> SampledNorms,
) -> Arc<SampledNorms> {
    if let Some((_, s)) = cache.lock().unwrap().iter().find(|(x, _)| x == x_norm) {
        return s.clone();
    }
    let s = Arc::new(build());
    let mut guard = cache.lock().unwrap();
    if let Some((_, existing)) = guard.iter().find(|(x, _)| x == x_norm) {
        return existing.clone();
    }
    guard.push((x_norm.clone(), s.clone()));
    s
}

/// `R(t) = Û'(t) + A(t)Û(t) - f(t)`, evaluated slab by slab.
pub struct Residual {
    problem: ProblemSpec,
    hat: MeshFunction,
    /// `AÛ` as a mesh function when `A` is constant.
    a_hat: Option<MeshFunction>,
    quad: NormQuadrature,
    samples: SampleCache,
}

impl std::fmt::Debug for Residual {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Residual")
            .field("slabs", &self.hat.mesh().num_slabs())
            .field("dim", &self.hat.dim())
            .finish()
    }
}

fn check_prefix(mesh: &TimeMesh, m: usize) -> Result<()> {
    if m == 0 || m > mesh.num_slabs() {
        return Err(DgError::Validation(format!(
            "prefix index {m} outside 1..={}",
            mesh.num_slabs()
        )));
    }
    Ok(())
}

/// Index `m` with `t_m` equal to the given time.
fn prefix_of(mesh: &TimeMesh, t_m: f64) -> Result<usize> {
    match mesh.index_of(t_m) {
        Some(m) if m >= 1 => Ok(m),
        _ => Err(DgError::Validation(format!("t_m = {t_m} is not a mesh point in (0, T]"))),
    }
}

impl Residual {
    pub fn new(
        sol: &DGSolution,
        recon: &Reconstruction,
        problem: &ProblemSpec,
        quad: NormQuadrature,
    ) -> Result<Self> {
        let hat = recon.hat();
        if hat.mesh() != sol.mesh()
            || recon.source().mesh() != sol.mesh()
            || recon.source().nodal_blocks() != sol.solution().nodal_blocks()
        {
            return Err(DgError::Validation(
                "reconstruction was not built from this solution".into(),
            ));
        }
        if (hat.mesh().horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon()
            || hat.dim() != problem.dim()
        {
            return Err(DgError::Validation("residual mesh does not match the problem".into()));
        }
        let a_hat = match problem.operator() {
            Operator::Autonomous(a) => Some(hat.map_linear(|x| a.apply(x))),
            Operator::Nonautonomous(_) => None,
        };
        Ok(Residual {
            problem: problem.clone(),
            hat: hat.clone(),
            a_hat,
            quad,
            samples: Mutex::new(Vec::new()),
        })
    }

    pub fn hat(&self) -> &MeshFunction {
        &self.hat
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn mesh(&self) -> &TimeMesh {
        self.hat.mesh()
    }

    pub fn quadrature(&self) -> &NormQuadrature {
        &self.quad
    }

    /// `A(t)Û(t)` on slab `n`.
    pub fn a_hat_slab(&self, n: usize, tau: f64) -> DVector<f64> {
        match &self.a_hat {
            Some(a_hat) => a_hat.eval_slab(n, tau),
            None => {
                let t = self.mesh().time(n, tau);
                self.problem.operator().apply_at(t, &self.hat.eval_slab(n, tau))
            }
        }
    }

    pub fn eval_slab(&self, n: usize, tau: f64) -> DVector<f64> {
        let t = self.mesh().time(n, tau);
        self.hat.deriv_slab(n, tau) + self.a_hat_slab(n, tau) - self.problem.forcing().at(t)
    }

    /// Pointwise `‖R(t)‖_X` at the norm quadrature samples; computed once per
    /// state-space norm.
    pub fn sampled(&self, x_norm: &XNorm) -> Arc<SampledNorms> {
        cached_samples(&self.samples, x_norm, || {
            SampledNorms::sample(self.mesh(), self.mesh().num_slabs(), &self.quad, x_norm, self)
        })
    }

    /// `‖R‖_{Lᵖ((0, t_m); X)}`.
    pub fn norm(&self, spec: &NormSpec, m: usize) -> Result<f64> {
        check_prefix(self.mesh(), m)?;
        Ok(self.sampled(spec.x_norm()).prefix_norm(m, spec.p()))
    }

    /// Entry `m - 1` is `‖R‖_{Lᵖ((0, t_m); X)}`.
    pub fn prefix_norms(&self, spec: &NormSpec) -> Vec<f64> {
        self.sampled(spec.x_norm()).prefix_norms(spec.p())
    }
}

impl SlabFunction for Residual {
    fn eval_slab(&self, slab: usize, tau: f64) -> DVector<f64> {
        Residual::eval_slab(self, slab, tau)
    }
}

/// Largest deviation from `Û'(t_ni) + AÛ(t_ni) = f_ni` over all stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollocationCheck {
    pub max_defect: f64,
    /// Largest `‖f_ni‖_∞` or `‖AÛ(t_ni)‖_∞` seen, for relative comparisons.
    pub scale: f64,
}

impl CollocationCheck {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_defect / self.scale
        } else {
            self.max_defect
        }
    }
}

/// Checks that `Û` is the collocation polynomial of the averaged scheme.
/// Defined for constant operators only.
pub fn collocation_check(sol: &DGSolution, resid: &Residual) -> Result<CollocationCheck> {
    if !resid.problem().operator().is_autonomous() {
        return Err(DgError::Validation(
            "the collocation identity is checked for constant operators only".into(),
        ));
    }
    let mut check = CollocationCheck {
        max_defect: 0.0,
        scale: 0.0,
    };
    for n in 0..sol.mesh().num_slabs() {
        for (i, &c) in sol.tableau().nodes().iter().enumerate() {
            let a_hat = resid.a_hat_slab(n, c);
            let favg = sol.f_averages(n).column(i);
            let defect = resid.hat().deriv_slab(n, c) + &a_hat - favg;
            check.max_defect = check.max_defect.max(defect.amax());
            check.scale = check.scale.max(a_hat.amax()).max(favg.amax());
        }
    }
    Ok(check)
}

/// `‖ê'‖` and `‖A(·)ê‖` samples for `ê = u - Û`.
struct ErrorSamples {
    deriv: SampledNorms,
    a: SampledNorms,
    scale: SampledNorms,
}

fn error_samples(resid: &Residual, truth: &ExactSolution, x_norm: &XNorm) -> ErrorSamples {
    let mesh = resid.mesh();
    let n = mesh.num_slabs();
    let quad = resid.quadrature();
    let hat = resid.hat();
    let op = resid.problem().operator();
    let deriv = |s: usize, tau: f64| truth.derivative(mesh.time(s, tau)) - hat.deriv_slab(s, tau);
    let a = |s: usize, tau: f64| {
        let t = mesh.time(s, tau);
        op.apply_at(t, &truth.value(t)) - resid.a_hat_slab(s, tau)
    };
    let scale = |s: usize, tau: f64| {
        let t = mesh.time(s, tau);
        truth.derivative(t).abs() + op.apply_at(t, &truth.value(t)).abs()
    };
    ErrorSamples {
        deriv: SampledNorms::sample(mesh, n, quad, x_norm, &deriv),
        a: SampledNorms::sample(mesh, n, quad, x_norm, &a),
        scale: SampledNorms::sample(mesh, n, quad, x_norm, &scale),
    }
}

/// Both sides of the a posteriori estimate on one prefix `(0, t_m]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AposterioriBounds {
    pub prefix: usize,
    pub t_m: f64,
    pub resid: f64,
    pub err_deriv: f64,
    pub err_a: f64,
    /// `E(t_m) = ‖ê'‖ + ‖A ê‖`.
    pub error_sum: f64,
    /// `‖R‖ ≤ E·(1 + LOWER_BOUND_SLACK)`, also true when both sides vanish.
    pub lower_ok: bool,
    /// `E / ‖R‖`; `1` when both vanish.
    pub upper_ratio: f64,
    /// Both sides are below `ZERO_FLOOR` times the solution scale.
    pub degenerate: bool,
}

fn bounds_row(mesh: &TimeMesh, m: usize, resid: f64, err_deriv: f64, err_a: f64, scale: f64) -> AposterioriBounds {
    let error_sum = err_deriv + err_a;
    let floor = ZERO_FLOOR * scale.max(f64::MIN_POSITIVE);
    let degenerate = resid <= floor && error_sum <= floor;
    let upper_ratio = if degenerate {
        1.0
    } else if resid > 0.0 {
        error_sum / resid
    } else {
        f64::INFINITY
    };
    AposterioriBounds {
        prefix: m,
        t_m: mesh.point(m),
        resid,
        err_deriv,
        err_a,
        error_sum,
        lower_ok: degenerate || resid <= error_sum * (1.0 + LOWER_BOUND_SLACK),
        upper_ratio,
        degenerate,
    }
}

/// Bounds on `(0, t_m]`; `t_m` must be a mesh point.
pub fn aposteriori_bounds(
    resid: &Residual,
    truth: &ExactSolution,
    spec: &NormSpec,
    t_m: f64,
) -> Result<AposterioriBounds> {
    let m = prefix_of(resid.mesh(), t_m)?;
    Ok(aposteriori_profile(resid, truth, spec)?.swap_remove(m - 1))
}

/// Bounds for every prefix `m = 1..=N`.
pub fn aposteriori_profile(
    resid: &Residual,
    truth: &ExactSolution,
    spec: &NormSpec,
) -> Result<Vec<AposterioriBounds>> {
    let r = resid.prefix_norms(spec);
    let e = error_samples(resid, truth, spec.x_norm());
    let p = spec.p();
    let (ed, ea, sc) = (e.deriv.prefix_norms(p), e.a.prefix_norms(p), e.scale.prefix_norms(p));
    Ok((0..r.len())
        .map(|i| bounds_row(resid.mesh(), i + 1, r[i], ed[i], ea[i], sc[i]))
        .collect())
}

/// Same quantities for several exponents from one sampling pass.
pub fn aposteriori_profiles(
    resid: &Residual,
    truth: &ExactSolution,
    x_norm: &XNorm,
    exponents: &[f64],
) -> Vec<Vec<AposterioriBounds>> {
    let samples = resid.sampled(x_norm);
    let e = error_samples(resid, truth, x_norm);
    exponents
        .iter()
        .map(|&p| {
            let r = samples.prefix_norms(p);
            let (ed, ea, sc) = (e.deriv.prefix_norms(p), e.a.prefix_norms(p), e.scale.prefix_norms(p));
            (0..r.len())
                .map(|i| bounds_row(resid.mesh(), i + 1, r[i], ed[i], ea[i], sc[i]))
                .collect()
        })
        .collect()
}

/// The four left-hand quantities and `‖f‖` of the maximal-regularity
/// estimate on one prefix `(0, t_m]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxRegRow {
    pub prefix: usize,
    pub t_m: f64,
    /// `‖∂ₖÛ‖` in the discrete norm over the Radau stage times.
    pub diff_hat: f64,
    pub hat_deriv: f64,
    pub a_hat: f64,
    pub a_u: f64,
    pub forcing: f64,
}

impl MaxRegRow {
    pub fn lhs(&self) -> f64 {
        self.diff_hat + self.hat_deriv + self.a_hat + self.a_u
    }

    /// `lhs / ‖f‖`; `None` for `0/0`.
    pub fn ratio(&self) -> Option<f64> {
        let lhs = self.lhs();
        if self.forcing > 0.0 {
            Some(lhs / self.forcing)
        } else if lhs > 0.0 {
            Some(f64::INFINITY)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxRegReport {
    pub rows: Vec<MaxRegRow>,
}

impl MaxRegReport {
    pub fn last(&self) -> &MaxRegRow {
        self.rows.last().expect("at least one slab")
    }
}

/// Per-prefix `(Σ_{ℓ<m} k Σ_i ‖v(t_ℓi)‖^p)^{1/p}`, summed slab by slab.
fn discrete_prefix_norms(v: &MeshFunction, tableau: &RadauTableau, spec: &NormSpec) -> Vec<f64> {
    let k = v.mesh().step();
    let p = spec.p();
    let mut acc = 0.0;
    (0..v.mesh().num_slabs())
        .map(|n| {
            for &c in tableau.nodes() {
                acc += k * spec.x_norm().norm(&v.eval_slab(n, c)).powf(p);
            }
            acc.powf(1.0 / p)
        })
        .collect()
}

/// `‖∂ₖÛ‖` over `(0, t_m]` summed stage by stage: `Σ_i Σ_{n<m} k ‖∂U_{ni}‖^p`
/// with `U_{-1,i} = 0`.
pub fn stagewise_difference_norm(sol: &DGSolution, spec: &NormSpec, m: usize) -> Result<f64> {
    check_prefix(sol.mesh(), m)?;
    let k = sol.mesh().step();
    let p = spec.p();
    let q = sol.tableau().stages();
    let mut total = 0.0;
    for i in 0..q {
        let mut stage_sum = 0.0;
        for n in 0..m {
            let current = sol.stage_values(n).column(i);
            let diff = if n == 0 {
                current / k
            } else {
                (current - sol.stage_values(n - 1).column(i)) / k
            };
            stage_sum += k * spec.x_norm().norm(&diff).powf(p);
        }
        total += stage_sum;
    }
    Ok(total.powf(1.0 / p))
}

/// Prefix `Lᵖ` norms of `A(t_m)v` for each `m`, the operator frozen at the
/// prefix end (for constant `A` this is just `‖Av‖`).
fn frozen_operator_norms(
    op: &Operator,
    v: &MeshFunction,
    quad: &NormQuadrature,
    spec: &NormSpec,
) -> Vec<f64> {
    let mesh = v.mesh();
    let n = mesh.num_slabs();
    let p = spec.p();
    match op {
        Operator::Autonomous(a) => {
            let av = v.map_linear(|x| a.apply(x));
            SampledNorms::sample(mesh, n, quad, spec.x_norm(), &av).prefix_norms(p)
        }
        Operator::Nonautonomous(model) if !model.has_drift() => {
            let base = model.base();
            let av = v.map_linear(|x| base.apply(x));
            let norms = SampledNorms::sample(mesh, n, quad, spec.x_norm(), &av).prefix_norms(p);
            norms
                .into_iter()
                .enumerate()
                .map(|(i, x)| model.modulation().at(mesh.point(i + 1)) * x)
                .collect()
        }
        Operator::Nonautonomous(model) => (1..=n)
            .map(|m| {
                let frozen: DMatrix<f64> = model.matrix_at(mesh.point(m));
                let av = v.map_linear(|x| &frozen * x);
                SampledNorms::sample(mesh, m, quad, spec.x_norm(), &av).prefix_norm(m, p)
            })
            .collect(),
    }
}

/// Maximal-regularity quantities for every prefix. Requires `u₀ = 0`.
pub fn maxreg_report(
    sol: &DGSolution,
    recon: &Reconstruction,
    problem: &ProblemSpec,
    spec: &NormSpec,
    quad: &NormQuadrature,
) -> Result<MaxRegReport> {
    spec.check_max_regularity()?;
    if problem.initial().amax() != 0.0 {
        return Err(DgError::Precondition(
            "the maximal-regularity report needs u0 = 0".into(),
        ));
    }
    let mesh = sol.mesh();
    let n = mesh.num_slabs();
    let p = spec.p();
    let hat = recon.hat();
    let diff_hat = discrete_prefix_norms(&backward_difference(hat), sol.tableau(), spec);
    let hat_deriv = SampledNorms::sample(mesh, n, quad, spec.x_norm(), &|s: usize, tau: f64| {
        hat.deriv_slab(s, tau)
    })
    .prefix_norms(p);
    let a_hat = frozen_operator_norms(problem.operator(), hat, quad, spec);
    let a_u = frozen_operator_norms(problem.operator(), sol.solution(), quad, spec);
    let forcing = SampledNorms::sample(mesh, n, quad, spec.x_norm(), &|s: usize, tau: f64| {
        problem.forcing().at(mesh.time(s, tau))
    })
    .prefix_norms(p);
    Ok(MaxRegReport {
        rows: (0..n)
            .map(|i| MaxRegRow {
                prefix: i + 1,
                t_m: mesh.point(i + 1),
                diff_hat: diff_hat[i],
                hat_deriv: hat_deriv[i],
                a_hat: a_hat[i],
                a_u: a_u[i],
                forcing: forcing[i],
            })
            .collect(),
    })
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:e}")
    }
}

/// Writes `t_m,resid,err_deriv,err_A,effectivity,maxreg_ratio`, one row per
/// prefix. Without a report (or for `0/0`) the ratio is `NaN`.
pub fn write_report_csv(
    out: impl Write,
    bounds: &[AposterioriBounds],
    maxreg: Option<&MaxRegReport>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_m", "resid", "err_deriv", "err_A", "effectivity", "maxreg_ratio"])?;
    for (i, b) in bounds.iter().enumerate() {
        let ratio = maxreg
            .and_then(|r| r.rows.get(i))
            .and_then(MaxRegRow::ratio)
            .unwrap_or(f64::NAN);
        w.write_record([
            format!("{}", b.t_m),
            fmt_value(b.resid),
            fmt_value(b.err_deriv),
            fmt_value(b.err_a),
            fmt_value(b.upper_ratio),
            fmt_value(ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}
