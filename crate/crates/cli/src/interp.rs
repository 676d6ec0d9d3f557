//! Interpolation-operator checks: observed orders, reproduction and the
//! jump/orthogonality identity.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use dgtime::polyquad::GaussRule;
use dgtime::reconinterp::{hat_tilde, ortho_interpolate};
use dgtime::timefun::{NormQuadrature, SampledNorms, TimeMesh, XNorm};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Purpose, RunConfig};
use crate::error::Result;
use crate::normcheck::run_norm_checks;
use crate::rates::fit_rate;
use crate::report::PropertyCheck;

pub const RATE_SLACK: f64 = 0.15;
pub const REPRODUCTION_TRIALS: usize = 100;
pub const REPRODUCTION_TOL: f64 = 1e-11;
pub const JUMP_IDENTITY_TOL: f64 = 1e-10;
pub const JUMP_IDENTITY_TRIALS: usize = 30;

/// `u(t) = (sin(a t + b), e^{c t})` and its derivatives.
#[derive(Clone, Copy, Debug)]
pub struct SmoothPair {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SmoothPair {
    pub const DEFAULT: SmoothPair = SmoothPair { a: 3.0, b: 0.5, c: 0.7 };

    /// `j`-th time derivative.
    pub fn deriv(&self, j: usize, t: f64) -> DVector<f64> {
        let jf = j as f64;
        DVector::from_vec(vec![
            self.a.powi(j as i32) * (self.a * t + self.b + jf * FRAC_PI_2).sin(),
            self.c.powi(j as i32) * (self.c * t).exp(),
        ])
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        self.deriv(0, t)
    }
}

/// One `(q, p, N)` level of the interpolation sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpRow {
    pub q: usize,
    pub p: f64,
    pub n: usize,
    pub k: f64,
    /// `‖u - ũ‖_{Lᵖ}`
    pub tilde_err: f64,
    /// `‖u - (ũ)^‖_{Lᵖ}`
    pub hat_err: f64,
    /// `‖(u - (ũ)^)'‖_{Lᵖ}`
    pub hat_deriv_err: f64,
    /// `max_n ‖u - ũ‖_{L∞(J_n)} / |u|_{W^{q,p}(J_n)}`
    pub local_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct InterpReport {
    pub rows: Vec<InterpRow>,
    pub checks: Vec<PropertyCheck>,
}

pub const INTERP_CSV_HEADER: &str = "q,p,N,k,tilde_err,hat_err,hat_deriv_err,local_ratio";

pub fn write_interp_csv(out: impl Write, rows: &[InterpRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "{INTERP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.q, r.p, r.n, r.k, r.tilde_err, r.hat_err, r.hat_deriv_err, r.local_ratio
        )?;
    }
    w.flush()?;
    Ok(())
}

fn measure(
    u: SmoothPair,
    q: usize,
    n: usize,
    horizon: f64,
    p_list: &[f64],
    quad: &NormQuadrature,
) -> Result<Vec<InterpRow>> {
    let mesh = TimeMesh::new(horizon, n)?;
    let f = |t: f64| u.value(t);
    let tilde = ortho_interpolate(&f, &mesh, q)?.into_tilde();
    let hat = hat_tilde(&f, &mesh, q)?;
    let x = XNorm::Euclidean;
    let at = |s: usize, tau: f64| mesh.time(s, tau);
    let tilde_err = SampledNorms::sample(&mesh, n, quad, &x, &|s: usize, tau: f64| {
        u.value(at(s, tau)) - tilde.eval_slab(s, tau)
    });
    let hat_err = SampledNorms::sample(&mesh, n, quad, &x, &|s: usize, tau: f64| {
        u.value(at(s, tau)) - hat.eval_slab(s, tau)
    });
    let hat_deriv_err = SampledNorms::sample(&mesh, n, quad, &x, &|s: usize, tau: f64| {
        u.deriv(1, at(s, tau)) - hat.deriv_slab(s, tau)
    });
    let seminorm = SampledNorms::sample(&mesh, n, quad, &x, &|s: usize, tau: f64| u.deriv(q, at(s, tau)));
    let local_sup = tilde_err.slab_norms(f64::INFINITY);
    Ok(p_list
        .iter()
        .map(|&p| {
            let semi = seminorm.slab_norms(p);
            let local_ratio = local_sup
                .iter()
                .zip(&semi)
                .map(|(e, s)| e / s)
                .fold(0.0, f64::max);
            InterpRow {
                q,
                p,
                n,
                k: mesh.step(),
                tilde_err: tilde_err.prefix_norm(n, p),
                hat_err: hat_err.prefix_norm(n, p),
                hat_deriv_err: hat_deriv_err.prefix_norm(n, p),
                local_ratio,
            }
        })
        .collect())
}

/// Continuous piecewise polynomial of degree `m`: linear between random mesh
/// values plus random bubbles `τ(1-τ)τ^j`, `j < m - 1`; a constant for `m = 0`.
#[derive(Clone, Debug)]
pub struct RandomContinuous {
    pub mesh: TimeMesh,
    pub degree: usize,
    nodes: Vec<DVector<f64>>,
    bubbles: Vec<Vec<DVector<f64>>>,
}

impl RandomContinuous {
    pub fn new(rng: &mut ChaCha8Rng, mesh: TimeMesh, degree: usize, d: usize) -> Self {
        let draw = |rng: &mut ChaCha8Rng| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let nodes: Vec<DVector<f64>> = if degree == 0 {
            vec![draw(rng); mesh.num_slabs() + 1]
        } else {
            (0..=mesh.num_slabs()).map(|_| draw(rng)).collect()
        };
        let bubbles = (0..mesh.num_slabs())
            .map(|_| (0..degree.saturating_sub(1)).map(|_| draw(rng)).collect())
            .collect();
        RandomContinuous { mesh, degree, nodes, bubbles }
    }

    pub fn eval_slab(&self, n: usize, tau: f64) -> DVector<f64> {
        let mut v = &self.nodes[n] * (1.0 - tau) + &self.nodes[n + 1] * tau;
        let mut bump = tau * (1.0 - tau);
        for b in &self.bubbles[n] {
            v += b * bump;
            bump *= tau;
        }
        v
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        match self.mesh.locate(t) {
            Some((n, tau)) => self.eval_slab(n, tau),
            None => self.nodes[0].clone(),
        }
    }
}

/// Largest relative gap between `(ṽ)^` and `v`, and between `ṽ` and `v` when
/// `v` has degree `q - 1`, sampled on each slab.
pub fn reproduction_gap(v: &RandomContinuous, q: usize) -> Result<f64> {
    let f = |t: f64| v.value(t);
    let hat = hat_tilde(&f, &v.mesh, q)?;
    let tilde = (v.degree < q).then(|| ortho_interpolate(&f, &v.mesh, q)).transpose()?;
    let mut gap: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for n in 0..v.mesh.num_slabs() {
        for j in 0..=8 {
            let tau = j as f64 / 8.0;
            let exact = v.eval_slab(n, tau);
            gap = gap.max((hat.eval_slab(n, tau) - &exact).amax());
            if let Some(t) = &tilde {
                gap = gap.max((t.tilde().eval_slab(n, tau) - &exact).amax());
            }
            scale = scale.max(exact.amax());
        }
    }
    Ok(gap / scale.max(f64::MIN_POSITIVE))
}

/// `∫_{J_n}⟨ρ', v⟩ + ⟨ρ_n^+ - ρ_n, v_n^+⟩` for `ρ = u - ũ` and a random test
/// polynomial `v` of degree `q - 1`, divided by the sum of the magnitudes of
/// its terms.
pub fn jump_identity_defect(rng: &mut ChaCha8Rng, q: usize) -> Result<f64> {
    let u = SmoothPair {
        a: rng.random_range(0.5..6.0),
        b: rng.random_range(-1.0..1.0),
        c: rng.random_range(-1.0..1.0),
    };
    let mesh = TimeMesh::new(rng.random_range(0.5..2.0), rng.random_range(1..=10))?;
    let n = rng.random_range(0..mesh.num_slabs());
    let f = |t: f64| u.value(t);
    let interp = ortho_interpolate(&f, &mesh, q)?;
    let tilde = interp.tilde();
    let coeffs: Vec<DVector<f64>> = (0..q)
        .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let test = |tau: f64| {
        coeffs
            .iter()
            .rev()
            .fold(DVector::zeros(2), |acc: DVector<f64>, c| acc * tau + c)
    };
    let gauss = GaussRule::new(24)?;
    let k = mesh.step();
    let mut integral = 0.0;
    let mut magnitude = 0.0;
    for (&tau, &w) in gauss.nodes().iter().zip(gauss.weights()) {
        let rho_dot = u.deriv(1, mesh.time(n, tau)) - tilde.deriv_slab(n, tau);
        let v = test(tau);
        integral += k * w * rho_dot.dot(&v);
        magnitude += k * w * rho_dot.norm() * v.norm();
    }
    let t_n = mesh.point(n);
    let rho_plus = u.value(t_n) - tilde.eval_slab(n, 0.0);
    let rho_minus = u.value(t_n) - tilde.left_limit(n);
    let v_plus = test(0.0);
    let jump = (&rho_plus - &rho_minus).dot(&v_plus);
    magnitude += (&rho_plus - &rho_minus).norm() * v_plus.norm();
    Ok((integral + jump).abs() / magnitude.max(f64::MIN_POSITIVE))
}

/// Runs the order sweep over `q × p × N`, reproduction trials and the
/// jump/orthogonality identity.
pub fn run_interp_check(cfg: &RunConfig) -> Result<InterpReport> {
    cfg.validate(Purpose::Interp)?;
    let quad = cfg.norm_quadrature()?;
    let horizon = cfg.problem.horizon;
    let p_list = &cfg.norm.p_list;
    let jobs: Vec<(usize, usize)> = cfg
        .solver
        .q
        .iter()
        .flat_map(|&q| cfg.solver.n_list.iter().map(move |&n| (q, n)))
        .collect();
    let measured: Vec<Vec<InterpRow>> = jobs
        .par_iter()
        .map(|&(q, n)| measure(SmoothPair::DEFAULT, q, n, horizon, p_list, &quad))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &q in &cfg.solver.q {
        for (pi, &p) in p_list.iter().enumerate() {
            let series: Vec<&InterpRow> = jobs
                .iter()
                .zip(&measured)
                .filter(|((jq, _), _)| *jq == q)
                .map(|(_, r)| &r[pi])
                .collect();
            let qf = q as f64;
            let metrics: [(&str, fn(&InterpRow) -> f64, f64); 4] = [
                ("u - tilde u", |r| r.tilde_err, qf),
                ("u - hat tilde u", |r| r.hat_err, qf),
                ("(u - hat tilde u)'", |r| r.hat_deriv_err, qf),
                ("local sup / seminorm", |r| r.local_ratio, qf - 1.0 / p),
            ];
            for (name, get, order) in metrics {
                let pts: Vec<(f64, f64)> = series.iter().map(|r| (r.k, get(r))).collect();
                let fit = fit_rate(&pts);
                let target = order - RATE_SLACK;
                checks.push(PropertyCheck::new(
                    format!("rate {name} q={q} p={p}"),
                    fit.at_least(target),
                    match fit.slope() {
                        Some(s) => format!("{s:.3} vs >= {target:.2}"),
                        None => "no-fit".into(),
                    },
                ));
            }
            rows.extend(series.into_iter().cloned());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.output.seed);
    let qs = &cfg.solver.q;
    let mut worst: f64 = 0.0;
    for trial in 0..REPRODUCTION_TRIALS {
        let q = qs[trial % qs.len()];
        let mesh = TimeMesh::new(rng.random_range(0.5..2.0), rng.random_range(1..=8))?;
        let degree = if rng.random_bool(0.5) { q } else { q - 1 };
        let d = rng.random_range(1..=3);
        let v = RandomContinuous::new(&mut rng, mesh, degree, d);
        worst = worst.max(reproduction_gap(&v, q)?);
    }
    checks.push(PropertyCheck::new(
        "reproduction",
        worst <= REPRODUCTION_TOL,
        format!("{REPRODUCTION_TRIALS} random continuous piecewise polynomials, max relative gap {worst:.2e}"),
    ));

    let mut worst: f64 = 0.0;
    for trial in 0..JUMP_IDENTITY_TRIALS {
        worst = worst.max(jump_identity_defect(&mut rng, qs[trial % qs.len()])?);
    }
    checks.push(PropertyCheck::new(
        "jump/orthogonality identity",
        worst <= JUMP_IDENTITY_TOL,
        format!("{JUMP_IDENTITY_TRIALS} random slabs, max relative defect {worst:.2e}"),
    ));

    for &q in qs {
        let pts: Vec<(f64, f64)> = cfg
            .solver
            .n_list
            .iter()
            .map(|&n| {
                let mesh = TimeMesh::new(horizon, n)?;
                let f = |t: f64| DVector::from_element(1, t.powi(q as i32 + 1));
                let hat = hat_tilde(&f, &mesh, q)?;
                let err = SampledNorms::sample(&mesh, n, &quad, &XNorm::Euclidean, &|s: usize, tau: f64| {
                    f(mesh.time(s, tau)) - hat.eval_slab(s, tau)
                });
                Ok((mesh.step(), err.prefix_norm(n, 2.0)))
            })
            .collect::<Result<_>>()?;
        let fit = fit_rate(&pts);
        let target = q as f64 + 1.0 - RATE_SLACK;
        checks.push(PropertyCheck::new(
            format!("rate t^(q+1) - hat tilde q={q}"),
            fit.at_least(target),
            match fit.slope() {
                Some(s) => format!("{s:.3} vs >= {target:.2}"),
                None => "no-fit".into(),
            },
        ));
    }
    checks.extend(run_norm_checks(qs, p_list, &cfg.solver.n_list, &quad, cfg.output.seed)?);
    Ok(InterpReport { rows, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn smooth_pair_derivatives() {
        let u = SmoothPair::DEFAULT;
        let h = 1e-5;
        for j in 0..3 {
            let fd = (u.deriv(j, 0.4 + h) - u.deriv(j, 0.4 - h)) / (2.0 * h);
            assert!((fd - u.deriv(j + 1, 0.4)).amax() < 1e-6);
        }
    }

    #[test]
    fn random_continuous_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = RandomContinuous::new(&mut rng, TimeMesh::new(1.0, 4).unwrap(), 3, 2);
        for n in 1..4 {
            assert_abs_diff_eq!((v.eval_slab(n - 1, 1.0) - v.eval_slab(n, 0.0)).amax(), 0.0);
        }
    }
}
