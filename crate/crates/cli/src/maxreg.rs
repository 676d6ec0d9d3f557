//! Maximal-regularity ratio sweeps for problems with `u₀ = 0`.

use dgtime::dgsolve::{solve_dg_with, ProblemSpec, QuadratureSettings, SolverPath};
use dgtime::estimate::maxreg_report;
use dgtime::polyquad::RadauTableau;
use dgtime::reconinterp::reconstruct_solution;
use dgtime::timefun::{NormQuadrature, NormSpec, TimeMesh, XNorm};
use rayon::prelude::*;

use crate::config::{Purpose, RunConfig};
use crate::error::Result;
use crate::problems::zero_start_problem;
use crate::report::{Level, PropertyCheck, ReportRow};

/// Consecutive doublings of `N` may change the ratio by less than this.
pub const RATIO_VARIATION: f64 = 0.10;
/// Steps with `k L` above this are outside the small-step regime of the
/// time-dependent stability estimate; their ratios are reported, not checked.
pub const KL_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct MaxRegSweep {
    pub rows: Vec<ReportRow>,
    pub checks: Vec<PropertyCheck>,
}

enum CellRatio {
    Value(f64),
    Degenerate,
    Failed(String),
}

fn cell_ratio(
    cfg: &RunConfig,
    problem: &ProblemSpec,
    q: usize,
    n: usize,
    spec: &NormSpec,
    quad: &NormQuadrature,
) -> Result<Option<f64>> {
    let mesh = TimeMesh::new(problem.horizon(), n)?;
    let tableau = RadauTableau::new(q)?;
    let mut settings = QuadratureSettings::for_problem(q, problem.forcing());
    if let Some(g) = cfg.quadrature.forcing_points {
        settings.forcing_points = g;
    }
    if let Some(g) = cfg.quadrature.quad_a_points {
        settings.operator_points = g;
    }
    let sol = solve_dg_with(problem, &mesh, &tableau, SolverPath::Galerkin, settings)?;
    let recon = reconstruct_solution(&sol)?;
    let report = maxreg_report(&sol, &recon, problem, spec, quad)?;
    Ok(report.last().ratio())
}

fn is_doubling(a: usize, b: usize) -> bool {
    b == 2 * a
}

/// Ratio `(‖∂ₖÛ‖ + ‖Û'‖ + ‖AÛ‖ + ‖AU‖) / ‖f‖` over `(0, T]` for every
/// `(q, p, N)`.
pub fn run_maxreg_sweep(cfg: &RunConfig) -> Result<MaxRegSweep> {
    cfg.validate(Purpose::MaxReg)?;
    let (problem, lipschitz) = zero_start_problem(cfg, cfg.output.seed)?;
    let x_norm: XNorm = cfg.x_norm(problem.dim());
    let quad = cfg.norm_quadrature()?;
    let specs: Vec<NormSpec> = cfg
        .norm
        .p_list
        .iter()
        .map(|&p| NormSpec::for_max_regularity(p, x_norm.clone()))
        .collect::<std::result::Result<_, _>>()?;

    let jobs: Vec<(usize, usize, usize)> = cfg
        .solver
        .q
        .iter()
        .flat_map(|&q| {
            (0..specs.len()).flat_map(move |pi| cfg.solver.n_list.iter().map(move |&n| (q, pi, n)))
        })
        .collect();
    let ratios: Vec<CellRatio> = jobs
        .par_iter()
        .map(|&(q, pi, n)| match cell_ratio(cfg, &problem, q, n, &specs[pi], &quad) {
            Ok(Some(r)) => CellRatio::Value(r),
            Ok(None) => CellRatio::Degenerate,
            Err(e) => CellRatio::Failed(e.to_string()),
        })
        .collect();

    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let horizon = problem.horizon();
    let per_series = cfg.solver.n_list.len();
    for (series, chunk) in jobs.chunks(per_series).zip(ratios.chunks(per_series)) {
        let (q, pi, _) = series[0];
        let p = cfg.norm.p_list[pi];
        let mut checked: Vec<(usize, f64)> = Vec::new();
        let mut failures = Vec::new();
        let mut degenerate = 0;
        for (&(_, _, n), ratio) in series.iter().zip(chunk) {
            let k = horizon / n as f64;
            let mut row = ReportRow::empty(q, p, Level::Mesh(n), k);
            let kl = lipschitz.map(|l| k * l);
            let small_step = kl.is_none_or(|kl| kl <= KL_THRESHOLD);
            match ratio {
                CellRatio::Value(r) => {
                    row.maxreg_ratio = *r;
                    if small_step {
                        checked.push((n, *r));
                    }
                }
                CellRatio::Degenerate => {
                    row.note = "degenerate".into();
                    degenerate += 1;
                }
                CellRatio::Failed(reason) => {
                    row.note = reason.clone();
                    failures.push(format!("N={n}: {reason}"));
                }
            }
            if let Some(kl) = kl {
                let tag = format!("kL={kl}");
                row.note = if row.note.is_empty() { tag } else { format!("{} {tag}", row.note) };
            }
            rows.push(row);
        }
        let name = format!("maxreg ratio q={q} p={p}");
        if degenerate == per_series {
            checks.push(PropertyCheck::new(name, true, "f = 0, every ratio is 0/0"));
            continue;
        }
        let finite = failures.is_empty() && degenerate == 0 && checked.iter().all(|(_, r)| r.is_finite());
        let mut worst: f64 = 0.0;
        let mut pairs = 0;
        for w in checked.windows(2) {
            if is_doubling(w[0].0, w[1].0) {
                worst = worst.max((w[1].1 / w[0].1 - 1.0).abs());
                pairs += 1;
            }
        }
        let passed = finite && pairs > 0 && worst < RATIO_VARIATION;
        let detail = if failures.is_empty() {
            let values: Vec<String> = checked.iter().map(|(n, r)| format!("N={n}:{r:.4}")).collect();
            format!(
                "{}; max change per doubling {:.2}% over {pairs} pairs",
                values.join(" "),
                100.0 * worst
            )
        } else {
            failures.join("; ")
        };
        checks.push(PropertyCheck::new(name, passed, detail));
    }
    Ok(MaxRegSweep { rows, checks })
}
