//! Built-in model problems with exact solutions, and seeded random forcings.

use std::f64::consts::PI;
use std::sync::Arc;

use dgtime::dgsolve::{Forcing, Operator, ProblemSpec};
use dgtime::estimate::ExactSolution;
use dgtime::operators::{Modulation, NonautonomousModel, OperatorModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ForcingKind, ProblemConfig, ProblemKind, RunConfig};
use crate::error::{config_error, Result};

/// A problem whose exact solution is known, with `f := u' + A(t)u`.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub problem: ProblemSpec,
    pub exact: ExactSolution,
    pub label: String,
    /// `λ` for the scalar model, whose `q = 1` iterates are known in closed form.
    pub scalar_lambda: Option<f64>,
    /// Declared Lipschitz constant of `A(t)`, for time-dependent models.
    pub lipschitz: Option<f64>,
}

/// `w_j = sin(π x_j)` on the interior grid `x_j = j/(d+1)`.
pub fn sine_profile(d: usize) -> DVector<f64> {
    DVector::from_fn(d, |j, _| (PI * (j as f64 + 1.0) / (d as f64 + 1.0)).sin())
}

pub fn build_operator(cfg: &RunConfig) -> Result<Operator> {
    let p = &cfg.problem;
    let op = match p.kind {
        ProblemKind::Heat1d => Operator::Autonomous(Arc::new(OperatorModel::laplacian_1d(
            p.dimension,
            p.diffusion,
        )?)),
        ProblemKind::Nonnormal => {
            Operator::Autonomous(Arc::new(OperatorModel::nonnormal_model(p.dimension, p.skew)?))
        }
        ProblemKind::Scalar => Operator::Autonomous(Arc::new(OperatorModel::from_matrix(
            DMatrix::from_element(1, 1, p.diffusion),
            format!("scalar(lambda={})", p.diffusion),
        )?)),
        ProblemKind::NonautonomousHeat1d => {
            let base = Arc::new(OperatorModel::laplacian_1d(p.dimension, p.diffusion)?);
            let modulation = Modulation::affine(p.modulation.intercept, p.modulation.slope);
            Operator::Nonautonomous(Arc::new(NonautonomousModel::modulated(
                base, modulation, p.horizon,
            )?))
        }
        ProblemKind::MatrixFile => {
            let path = p
                .matrix_file
                .as_ref()
                .ok_or_else(|| config_error("problem.matrix_file", "missing"))?;
            let model = OperatorModel::read_dense(&cfg.resolve(path))?;
            if model.dim() != p.dimension {
                return Err(config_error(
                    "problem.dimension",
                    format!("matrix file has dimension {}", model.dim()),
                ));
            }
            Operator::Autonomous(Arc::new(model))
        }
    };
    Ok(op)
}

fn dim_of(p: &ProblemConfig) -> usize {
    if p.kind == ProblemKind::Scalar {
        1
    } else {
        p.dimension
    }
}

/// The exact solution `u(t) = e^{-μt} w` paired with the configured operator:
/// `μ = λ`, `w = 1` for the scalar model, otherwise `μ = 1` and `w` the sine
/// profile.
pub fn manufactured(cfg: &RunConfig) -> Result<ManufacturedProblem> {
    let p = &cfg.problem;
    let operator = build_operator(cfg)?;
    let d = dim_of(p);
    let (rate, w) = match p.kind {
        ProblemKind::Scalar => (p.diffusion, DVector::from_element(1, 1.0)),
        _ => (1.0, sine_profile(d)),
    };
    let u = {
        let w = w.clone();
        Arc::new(move |t: f64| &w * (-rate * t).exp())
    };
    let du = {
        let w = w.clone();
        Arc::new(move |t: f64| &w * (-rate * (-rate * t).exp()))
    };
    let forcing = if p.kind == ProblemKind::Scalar {
        Forcing::zero(1)
    } else {
        let op = operator.clone();
        let w = w.clone();
        Forcing::new(d, move |t| {
            let u = &w * (-rate * t).exp();
            op.apply_at(t, &u) - u * rate
        })
    };
    let lipschitz = match &operator {
        Operator::Nonautonomous(m) => Some(m.bounds().lipschitz),
        Operator::Autonomous(_) => None,
    };
    let problem = ProblemSpec::new(operator, forcing, w, p.horizon)?;
    Ok(ManufacturedProblem {
        problem,
        exact: ExactSolution::new(u, du),
        label: format!("{:?}", p.kind),
        scalar_lambda: (p.kind == ProblemKind::Scalar).then_some(p.diffusion),
        lipschitz,
    })
}

/// Largest relative gap between `f(t)` and a central difference of `u` plus
/// `A(t)u(t)`, at `samples` random times.
pub fn spot_check_forcing(mp: &ManufacturedProblem, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = mp.problem.horizon();
    let h = 1e-5 * horizon;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let t = rng.random_range(h..horizon - h);
        let du = (mp.exact.value(t + h) - mp.exact.value(t - h)) / (2.0 * h);
        let au = mp.problem.operator().apply_at(t, &mp.exact.value(t));
        let f = mp.problem.forcing().at(t);
        let scale = du.amax().max(au.amax()).max(f.amax()).max(f64::MIN_POSITIVE);
        worst = worst.max((du + au - f).amax() / scale);
    }
    worst
}

/// `f_r(t) = Σ_m c_rm sin(mπ t / T + φ_rm)`, coefficients drawn from `seed`.
pub fn random_trig_forcing(d: usize, horizon: f64, terms: usize, seed: u64) -> Forcing {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..d * terms)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    Forcing::new(d, move |t| {
        DVector::from_fn(d, |r, _| {
            (0..terms)
                .map(|m| {
                    let (c, phase) = coeffs[r * terms + m];
                    c * ((m as f64 + 1.0) * PI * t / horizon + phase).sin()
                })
                .sum()
        })
    })
}

/// Problem with `u₀ = 0` and the configured forcing (random by default).
pub fn zero_start_problem(cfg: &RunConfig, seed: u64) -> Result<(ProblemSpec, Option<f64>)> {
    let p = &cfg.problem;
    let operator = build_operator(cfg)?;
    let d = dim_of(p);
    let forcing = match p.forcing.unwrap_or(ForcingKind::RandomTrig) {
        ForcingKind::Zero => Forcing::zero(d),
        ForcingKind::RandomTrig => random_trig_forcing(d, p.horizon, p.forcing_terms, seed),
        ForcingKind::Manufactured => {
            return Err(config_error("problem.forcing", "manufactured forcing has u0 != 0"))
        }
    };
    let lipschitz = match &operator {
        Operator::Nonautonomous(m) => Some(m.bounds().lipschitz),
        Operator::Autonomous(_) => None,
    };
    Ok((ProblemSpec::new(operator, forcing, DVector::zeros(d), p.horizon)?, lipschitz))
}
