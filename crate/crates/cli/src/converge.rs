//! Convergence sweeps over `(q, p, N)` on a manufactured problem.

use dgtime::dgsolve::{solve_dg_with, DGSolution, QuadratureSettings, SolverPath};
use dgtime::estimate::{aposteriori_profiles, collocation_check, Residual};
use dgtime::polyquad::RadauTableau;
use dgtime::reconinterp::reconstruct_solution;
use dgtime::timefun::{NormQuadrature, SampledNorms, TimeMesh, XNorm};
use log::info;
use rayon::prelude::*;

use crate::config::{PathChoice, Purpose, RunConfig};
use crate::error::Result;
use crate::problems::{manufactured, spot_check_forcing, ManufacturedProblem};
use crate::rates::{fit_rate, RateFit};
use crate::report::{Level, PropertyCheck, ReportRow};

/// Observed orders must reach `q - RATE_SLACK`.
pub const RATE_SLACK: f64 = 0.15;
/// Effectivity may vary by less than this factor across the `N` sweep.
pub const EFFECTIVITY_SPREAD: f64 = 2.0;
pub const COLLOCATION_TOL: f64 = 1e-9;
pub const PATH_TOL: f64 = 1e-10;
pub const RECURSION_TOL: f64 = 1e-12;
pub const FORCING_CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
struct ExponentNorms {
    err_au: f64,
    err_dhatu: f64,
    err_ahatu: f64,
    resid: f64,
    effectivity: f64,
    degenerate: bool,
    /// Largest `‖R‖ / E` over all prefixes.
    worst_lower: f64,
    lower_ok: bool,
}

#[derive(Clone, Debug)]
struct Cell {
    q: usize,
    n: usize,
    k: f64,
    norms: Vec<ExponentNorms>,
    collocation: Option<f64>,
    path_gap: Option<f64>,
    recursion_gap: Option<f64>,
    failure: Option<String>,
}

/// Rows for the CSV plus every asserted property.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub rows: Vec<ReportRow>,
    pub checks: Vec<PropertyCheck>,
}

fn settings(cfg: &RunConfig, q: usize, mp: &ManufacturedProblem) -> QuadratureSettings {
    let mut s = QuadratureSettings::for_problem(q, mp.problem.forcing());
    if let Some(g) = cfg.quadrature.forcing_points {
        s.forcing_points = g;
    }
    if let Some(g) = cfg.quadrature.quad_a_points {
        s.operator_points = g;
    }
    s
}

fn max_stage_gap(a: &DGSolution, b: &DGSolution) -> f64 {
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

fn run_cell(
    cfg: &RunConfig,
    mp: &ManufacturedProblem,
    q: usize,
    n: usize,
    x_norm: &XNorm,
    quad: &NormQuadrature,
) -> Cell {
    let mut cell = Cell {
        q,
        n,
        k: cfg.problem.horizon / n as f64,
        norms: Vec::new(),
        collocation: None,
        path_gap: None,
        recursion_gap: None,
        failure: None,
    };
    if let Err(e) = fill_cell(cfg, mp, x_norm, quad, &mut cell) {
        cell.failure = Some(e.to_string());
    }
    cell
}

fn fill_cell(
    cfg: &RunConfig,
    mp: &ManufacturedProblem,
    x_norm: &XNorm,
    quad: &NormQuadrature,
    cell: &mut Cell,
) -> Result<()> {
    let (q, n) = (cell.q, cell.n);
    let mesh = TimeMesh::new(cfg.problem.horizon, n)?;
    cell.k = mesh.step();
    let tableau = RadauTableau::new(q)?;
    let settings = settings(cfg, q, mp);
    let primary_path = match cfg.solver.path {
        PathChoice::RadauAveraged => SolverPath::RadauAveraged,
        _ => SolverPath::Galerkin,
    };
    let sol = solve_dg_with(&mp.problem, &mesh, &tableau, primary_path, settings)?;
    if cfg.solver.path == PathChoice::Both {
        let other = solve_dg_with(&mp.problem, &mesh, &tableau, SolverPath::RadauAveraged, settings)?;
        cell.path_gap = Some(max_stage_gap(&sol, &other));
    }
    if let (Some(lambda), 1) = (mp.scalar_lambda, q) {
        let gap = (0..=n)
            .map(|i| (sol.nodal_value(i)[0] - (1.0 + cell.k * lambda).powi(-(i as i32))).abs())
            .fold(0.0, f64::max);
        cell.recursion_gap = Some(gap);
    }
    let recon = reconstruct_solution(&sol)?;
    let resid = Residual::new(&sol, &recon, &mp.problem, quad.clone())?;
    if mp.problem.operator().is_autonomous() {
        cell.collocation = Some(collocation_check(&sol, &resid)?.relative());
    }
    let u = sol.solution();
    let op = mp.problem.operator();
    let err_au = SampledNorms::sample(&mesh, n, quad, x_norm, &|s: usize, tau: f64| {
        let t = mesh.time(s, tau);
        op.apply_at(t, &(mp.exact.value(t) - u.eval_slab(s, tau)))
    });
    let profiles = aposteriori_profiles(&resid, &mp.exact, x_norm, &cfg.norm.p_list);
    for (profile, &p) in profiles.iter().zip(&cfg.norm.p_list) {
        let last = profile.last().expect("at least one slab");
        let worst_lower = profile
            .iter()
            .filter(|b| !b.degenerate)
            .map(|b| b.resid / b.error_sum)
            .fold(0.0, f64::max);
        cell.norms.push(ExponentNorms {
            err_au: err_au.prefix_norm(n, p),
            err_dhatu: last.err_deriv,
            err_ahatu: last.err_a,
            resid: last.resid,
            effectivity: last.upper_ratio,
            degenerate: last.degenerate,
            worst_lower,
            lower_ok: profile.iter().all(|b| b.lower_ok),
        });
    }
    Ok(())
}

fn fmt_fit(fit: RateFit) -> String {
    match fit {
        RateFit::Slope(s) => format!("{s:.3}"),
        RateFit::NoFit => "no-fit".into(),
    }
}

/// Solves, reconstructs and measures every `(q, N)` cell, then fits rates per
/// `(q, p)`.
pub fn run_convergence(cfg: &RunConfig) -> Result<ErrorReport> {
    cfg.validate(Purpose::Converge)?;
    let mp = manufactured(cfg)?;
    let x_norm = cfg.x_norm(mp.problem.dim());
    let quad = cfg.norm_quadrature()?;
    let mut checks = Vec::new();

    let spot = spot_check_forcing(&mp, 16, cfg.output.seed);
    checks.push(PropertyCheck::new(
        "forcing consistency",
        spot <= FORCING_CHECK_TOL,
        format!("max relative finite-difference gap {spot:.2e}"),
    ));

    let jobs: Vec<(usize, usize)> = cfg
        .solver
        .q
        .iter()
        .flat_map(|&q| cfg.solver.n_list.iter().map(move |&n| (q, n)))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(q, n)| run_cell(cfg, &mp, q, n, &x_norm, &quad))
        .collect();
    info!("{} cells done for {}", cells.len(), mp.label);

    let mut rows = Vec::new();
    for &q in &cfg.solver.q {
        let series: Vec<&Cell> = cells.iter().filter(|c| c.q == q).collect();
        for c in &series {
            if let Some(f) = &c.failure {
                checks.push(PropertyCheck::new(format!("run q={q} N={}", c.n), false, f.clone()));
            }
            if let Some(g) = c.collocation {
                checks.push(PropertyCheck::new(
                    format!("collocation identity q={q} N={}", c.n),
                    g <= COLLOCATION_TOL,
                    format!("max relative defect {g:.2e}"),
                ));
            }
            if let Some(g) = c.path_gap {
                checks.push(PropertyCheck::new(
                    format!("galerkin vs radau-averaged q={q} N={}", c.n),
                    g <= PATH_TOL,
                    format!("max relative stage gap {g:.2e}"),
                ));
            }
            if let Some(g) = c.recursion_gap {
                checks.push(PropertyCheck::new(
                    format!("dG(0) recursion N={}", c.n),
                    g <= RECURSION_TOL,
                    format!("max |U_n - (1+k lambda)^-n| = {g:.2e}"),
                ));
            }
        }
        let exact_recursion = series.iter().all(|c| c.recursion_gap.is_some_and(|g| g <= RECURSION_TOL));
        for (pi, &p) in cfg.norm.p_list.iter().enumerate() {
            let mut pts: [Vec<(f64, f64)>; 4] = Default::default();
            let mut effs = Vec::new();
            let mut lower_ok = true;
            let mut worst_lower: f64 = 0.0;
            for c in &series {
                let mut row = ReportRow::empty(q, p, Level::Mesh(c.n), c.k);
                match (&c.failure, c.norms.get(pi)) {
                    (None, Some(e)) => {
                        row.err_au = e.err_au;
                        row.err_dhatu = e.err_dhatu;
                        row.err_ahatu = e.err_ahatu;
                        row.resid = e.resid;
                        row.effectivity = e.effectivity;
                        if e.degenerate {
                            row.note = "degenerate".into();
                        } else {
                            effs.push(e.effectivity);
                        }
                        for (slot, v) in pts.iter_mut().zip([e.err_au, e.err_dhatu, e.err_ahatu, e.resid]) {
                            slot.push((c.k, v));
                        }
                        lower_ok &= e.lower_ok;
                        worst_lower = worst_lower.max(e.worst_lower);
                    }
                    (failure, _) => {
                        row.note = failure.clone().unwrap_or_else(|| "missing".into());
                        lower_ok = false;
                    }
                }
                rows.push(row);
            }
            let fits: Vec<RateFit> = pts.iter().map(|v| fit_rate(v)).collect();
            let mut rate_row = ReportRow::empty(q, p, Level::Rate, f64::NAN);
            let slope = |f: RateFit| f.slope().unwrap_or(f64::NAN);
            rate_row.err_au = slope(fits[0]);
            rate_row.err_dhatu = slope(fits[1]);
            rate_row.err_ahatu = slope(fits[2]);
            rate_row.resid = slope(fits[3]);
            if exact_recursion {
                rate_row.note = "exact-recursion".into();
            } else if fits.contains(&RateFit::NoFit) {
                rate_row.note = "no-fit".into();
            }
            rows.push(rate_row);

            let target = q as f64 - RATE_SLACK;
            for (name, fit) in ["err_AU", "err_dhatU", "err_AhatU", "resid"].iter().zip(&fits) {
                checks.push(PropertyCheck::new(
                    format!("rate {name} q={q} p={p}"),
                    fit.at_least(target),
                    format!("{} vs >= {target:.2}", fmt_fit(*fit)),
                ));
            }
            checks.push(PropertyCheck::new(
                format!("lower bound q={q} p={p}"),
                lower_ok,
                format!("max resid/(err_deriv+err_A) over all prefixes {worst_lower:.6}"),
            ));
            let (lo, hi) = effs
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
            let spread = hi / lo;
            checks.push(PropertyCheck::new(
                format!("effectivity stability q={q} p={p}"),
                effs.len() >= 2 && spread.is_finite() && spread < EFFECTIVITY_SPREAD,
                format!("range [{lo:.4}, {hi:.4}], max/min {spread:.4}"),
            ));
        }
    }
    Ok(ErrorReport { rows, checks })
}
