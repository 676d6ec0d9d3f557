//! Discrete versus continuous norm checks on random piecewise polynomials.

use std::sync::Arc;

use dgtime::polyquad::{GaussRule, RadauTableau};
use dgtime::reconinterp::reconstruct;
use dgtime::timefun::{
    backward_difference, discrete_lp_norm, lp_norm, Continuity, MeshFunction, NormQuadrature, NormSpec, SlabBasis,
    TimeMesh,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::report::PropertyCheck;

/// Allowed `max/min - 1` of the norm ratio across the `N` sweep.
pub const DRIFT_TOL: f64 = 0.05;
/// Relative margin around the grid-searched single-slab ratio range.
pub const BOUND_SLACK: f64 = 1e-3;
pub const EQUALITY_TOL: f64 = 1e-12;
pub const COMMUTATION_TOL: f64 = 1e-11;
const SHAPES: usize = 3;
const DRAWS: usize = 4;
const TRIALS: usize = 20;

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))
}

/// Random element of `V_{k,0}^d(q-1)`: independent nodal values on every slab.
pub fn random_discontinuous(rng: &mut ChaCha8Rng, mesh: TimeMesh, q: usize, d: usize) -> Result<MeshFunction> {
    let blocks = (0..mesh.num_slabs())
        .map(|_| DMatrix::from_fn(d, q, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    Ok(MeshFunction::new(
        mesh,
        SlabBasis::radau(q)?,
        blocks,
        Continuity::Discontinuous,
        DVector::zeros(d),
    )?)
}

/// `a_n φ(τ)` on every slab with one fixed scalar shape `φ` given by its
/// values at the basis nodes.
fn shape_family(
    rng: &mut ChaCha8Rng,
    mesh: TimeMesh,
    basis: Arc<SlabBasis>,
    shape: &[f64],
    continuity: Continuity,
    d: usize,
) -> Result<MeshFunction> {
    let phi = DVector::from_row_slice(shape);
    let blocks = (0..mesh.num_slabs())
        .map(|_| random_vec(rng, d) * phi.transpose())
        .collect();
    Ok(MeshFunction::new(mesh, basis, blocks, continuity, DVector::zeros(d))?)
}

/// `(min, max)` of `discrete / continuous` over scalar polynomials of degree
/// `q - 1` on one unit slab, by a grid over the unit sphere of nodal values.
pub fn single_slab_ratio_range(q: usize, p: f64) -> Result<(f64, f64)> {
    let basis = SlabBasis::radau(q)?;
    let gauss = GaussRule::new(10)?;
    let panels = 40;
    let mut table = Vec::with_capacity(panels * gauss.nodes().len());
    for j in 0..panels {
        for (&g, &w) in gauss.nodes().iter().zip(gauss.weights()) {
            let tau = (j as f64 + g) / panels as f64;
            table.push((w / panels as f64, basis.lagrange().eval_all(tau)));
        }
    }
    let ratio = |x: &[f64]| {
        let cont: f64 = table
            .iter()
            .map(|(w, l)| w * l.iter().zip(x).map(|(l, c)| l * c).sum::<f64>().abs().powf(p))
            .sum();
        let disc: f64 = x.iter().map(|c| c.abs().powf(p)).sum();
        (disc / cont).powf(1.0 / p)
    };
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut visit = |x: &[f64]| {
        let r = ratio(x);
        lo = lo.min(r);
        hi = hi.max(r);
    };
    match q {
        1 => visit(&[1.0]),
        2 => {
            for i in 0..720 {
                let t = std::f64::consts::PI * i as f64 / 720.0;
                visit(&[t.cos(), t.sin()]);
            }
        }
        3 => {
            for i in 0..=90 {
                let theta = std::f64::consts::PI * i as f64 / 90.0;
                for j in 0..180 {
                    let phi = std::f64::consts::PI * j as f64 / 180.0;
                    visit(&[theta.cos(), theta.sin() * phi.cos(), theta.sin() * phi.sin()]);
                }
            }
        }
        _ => {
            return Err(dgtime::DgError::Range {
                what: "q",
                value: q.to_string(),
                range: "1..=3 for the ratio search",
            }
            .into());
        }
    }
    Ok((lo, hi))
}

fn ratio(v: &MeshFunction, tableau: &RadauTableau, spec: &NormSpec, quad: &NormQuadrature) -> Result<f64> {
    let n = v.mesh().num_slabs();
    Ok(discrete_lp_norm(v, tableau, spec, n)? / lp_norm(v, v.mesh(), spec, n, quad)?)
}

fn drift(ratios: &[f64]) -> f64 {
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    hi / lo - 1.0
}

/// All norm-toolkit checks for the given `q`, finite `p > 1` and mesh sizes.
pub fn run_norm_checks(
    qs: &[usize],
    p_list: &[f64],
    n_list: &[usize],
    quad: &NormQuadrature,
    seed: u64,
) -> Result<Vec<PropertyCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let ps: Vec<f64> = p_list.iter().copied().filter(|p| p.is_finite() && *p > 1.0).collect();
    for &q in qs {
        let tableau = RadauTableau::new(q)?;
        for &p in &ps {
            let spec = NormSpec::euclidean(p)?;

            let mut worst_drift: f64 = 0.0;
            let mut worst_drift_c: Option<f64> = None;
            for _ in 0..SHAPES {
                let shape: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut rs = Vec::new();
                for &n in n_list {
                    let mesh = TimeMesh::new(1.0, n)?;
                    let v = shape_family(&mut rng, mesh, SlabBasis::radau(q)?, &shape, Continuity::Discontinuous, 2)?;
                    rs.push(ratio(&v, &tableau, &spec, quad)?);
                }
                worst_drift = worst_drift.max(drift(&rs));
                if q >= 2 {
                    let mut bubble = vec![0.0];
                    bubble.extend((1..q).map(|_| rng.random_range(-1.0..1.0)));
                    bubble.push(0.0);
                    let mut rs = Vec::new();
                    for &n in n_list {
                        let mesh = TimeMesh::new(1.0, n)?;
                        let v = shape_family(
                            &mut rng,
                            mesh,
                            SlabBasis::radau_with_left(q)?,
                            &bubble,
                            Continuity::Continuous,
                            2,
                        )?;
                        rs.push(ratio(&v, &tableau, &spec, quad)?);
                    }
                    worst_drift_c = Some(worst_drift_c.unwrap_or(0.0).max(drift(&rs)));
                }
            }
            checks.push(PropertyCheck::new(
                format!("norm ratio drift q={q} p={p}"),
                worst_drift < DRIFT_TOL && worst_drift_c.is_none_or(|d| d < DRIFT_TOL),
                match worst_drift_c {
                    Some(c) => format!("discontinuous {:.2e}, continuous {:.2e}", worst_drift, c),
                    None => format!("discontinuous {:.2e}", worst_drift),
                },
            ));

            let (lo, hi) = single_slab_ratio_range(q, p)?;
            let c_tilde = (1.0 + BOUND_SLACK) / lo;
            let mut seen_lo = f64::INFINITY;
            let mut seen_hi: f64 = 0.0;
            let mut dominated = true;
            for &n in n_list {
                for _ in 0..DRAWS {
                    let v = random_discontinuous(&mut rng, TimeMesh::new(1.0, n)?, q, 1)?;
                    let disc = discrete_lp_norm(&v, &tableau, &spec, n)?;
                    let cont = lp_norm(&v, v.mesh(), &spec, n, quad)?;
                    seen_lo = seen_lo.min(disc / cont);
                    seen_hi = seen_hi.max(disc / cont);
                    dominated &= cont <= c_tilde * disc;
                }
            }
            checks.push(PropertyCheck::new(
                format!("norm equivalence bounds q={q} p={p}"),
                seen_lo >= lo * (1.0 - BOUND_SLACK) && seen_hi <= hi * (1.0 + BOUND_SLACK),
                format!("observed [{seen_lo:.4}, {seen_hi:.4}] within [{lo:.4}, {hi:.4}]"),
            ));
            checks.push(PropertyCheck::new(
                format!("continuous norm domination q={q} p={p}"),
                dominated,
                format!("c = {c_tilde:.4} over N in {n_list:?}"),
            ));
        }
    }

    let mut monotone = true;
    let mut eq_gap: f64 = 0.0;
    let mut comm_gap: f64 = 0.0;
    for trial in 0..TRIALS {
        let q = qs[trial % qs.len()];
        let p = ps[trial % ps.len().max(1)];
        let spec = NormSpec::euclidean(p)?;
        let tableau = RadauTableau::new(q)?;
        let n = rng.random_range(1..=12);
        let mesh = TimeMesh::new(rng.random_range(0.5..2.0), n)?;
        let v = random_discontinuous(&mut rng, mesh, q, 3)?;
        let zero = DVector::zeros(3);
        let hat = reconstruct(&v, &zero)?.into_hat();
        let mut prev = 0.0;
        for m in 1..=n {
            let a = discrete_lp_norm(&v, &tableau, &spec, m)?;
            let b = discrete_lp_norm(&hat, &tableau, &spec, m)?;
            monotone &= a >= prev;
            prev = a;
            eq_gap = eq_gap.max((a - b).abs() / a.max(f64::MIN_POSITIVE));
        }
        let left = reconstruct(&backward_difference(&v), &zero)?.into_hat();
        let right = backward_difference(&hat);
        let mut gap: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for s in 0..n {
            for j in 0..=8 {
                let tau = j as f64 / 8.0;
                let a = left.eval_slab(s, tau);
                gap = gap.max((&a - right.eval_slab(s, tau)).amax());
                scale = scale.max(a.amax());
            }
        }
        comm_gap = comm_gap.max(gap / scale.max(f64::MIN_POSITIVE));
    }
    checks.push(PropertyCheck::new(
        "discrete norm prefix monotonicity",
        monotone,
        format!("{TRIALS} random functions"),
    ));
    checks.push(PropertyCheck::new(
        "discrete norm of v and its reconstruction",
        eq_gap <= EQUALITY_TOL,
        format!("max relative gap {eq_gap:.2e}"),
    ));
    checks.push(PropertyCheck::new(
        "backward difference commutes with reconstruction",
        comm_gap <= COMMUTATION_TOL,
        format!("max relative gap {comm_gap:.2e}"),
    ));
    Ok(checks)
}
