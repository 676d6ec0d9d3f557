//! Run configuration: a TOML file with `[problem]`, `[solver]`, `[norm]`,
//! `[quadrature]` and `[output]` tables. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use dgtime::timefun::{NormQuadrature, XNorm};
use dgtime::polyquad::MAX_STAGES;
use serde::Deserialize;

use crate::error::{config_error, Result};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Heat1d,
    Nonnormal,
    Scalar,
    NonautonomousHeat1d,
    MatrixFile,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ForcingKind {
    /// `f = u' + A(t)u` for the built-in exact solution.
    Manufactured,
    /// Seeded sum of sines, `u₀ = 0`.
    RandomTrig,
    Zero,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PathChoice {
    #[default]
    Galerkin,
    RadauAveraged,
    Both,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModulationConfig {
    #[serde(default = "one")]
    pub intercept: f64,
    #[serde(default = "half")]
    pub slope: f64,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        ModulationConfig {
            intercept: 1.0,
            slope: 0.5,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "one")]
    pub diffusion: f64,
    #[serde(default)]
    pub skew: f64,
    #[serde(default)]
    pub modulation: ModulationConfig,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub matrix_file: Option<PathBuf>,
    #[serde(default)]
    pub forcing: Option<ForcingKind>,
    /// Number of sine terms per component of a random forcing.
    #[serde(default = "default_terms")]
    pub forcing_terms: usize,
}

fn default_dimension() -> usize {
    50
}

fn default_terms() -> usize {
    3
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_q")]
    pub q: Vec<usize>,
    #[serde(rename = "N_list", default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub path: PathChoice,
}

fn default_q() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_n_list() -> Vec<usize> {
    vec![8, 16, 32, 64, 128]
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            q: default_q(),
            n_list: default_n_list(),
            path: PathChoice::Galerkin,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum XNormChoice {
    Euclidean,
    /// Weights `h = 1/(d+1)`: the discrete `L²(0, 1)` norm of grid values.
    Grid,
    /// Weights from `x_weights`.
    Weighted,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default = "default_x_norm")]
    pub x_norm: XNormChoice,
    #[serde(default)]
    pub x_weights: Option<Vec<f64>>,
}

fn default_p_list() -> Vec<f64> {
    vec![2.0, 4.0]
}

fn default_x_norm() -> XNormChoice {
    XNormChoice::Euclidean
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            p_list: default_p_list(),
            x_norm: XNormChoice::Euclidean,
            x_weights: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Gauss points per slab for `∫ A(t)ℓ_iℓ_j`; default `2q`.
    #[serde(default)]
    pub quad_a_points: Option<usize>,
    /// Gauss points per slab for `∫ ℓ_i f`; default `q + 4`.
    #[serde(default)]
    pub forcing_points: Option<usize>,
}

fn default_panels() -> usize {
    16
}

fn default_points() -> usize {
    10
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            panels: default_panels(),
            points: default_points(),
            quad_a_points: None,
            forcing_points: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub plotdata_path: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    20_240_601
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            csv_path: None,
            plotdata_path: None,
            seed: default_seed(),
        }
    }
}

/// What the configuration will drive; validation depends on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Converge,
    MaxReg,
    Interp,
    Oracle,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub norm: NormConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative paths inside the file refer to.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Field-level checks for the given purpose.
    pub fn validate(&self, purpose: Purpose) -> Result<()> {
        let p = &self.problem;
        if p.dimension == 0 {
            return Err(config_error("problem.dimension", "must be at least 1"));
        }
        if p.kind == ProblemKind::Nonnormal && p.dimension < 2 {
            return Err(config_error("problem.dimension", "nonnormal model needs at least 2"));
        }
        if !(p.diffusion > 0.0 && p.diffusion.is_finite()) {
            return Err(config_error("problem.diffusion", "must be positive"));
        }
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(config_error("problem.T", "must be positive"));
        }
        if p.kind == ProblemKind::MatrixFile && p.matrix_file.is_none() {
            return Err(config_error("problem.matrix_file", "required for kind = \"matrix-file\""));
        }
        if p.forcing_terms == 0 {
            return Err(config_error("problem.forcing_terms", "must be at least 1"));
        }
        match (purpose, p.forcing) {
            (Purpose::Converge, Some(f)) if f != ForcingKind::Manufactured => {
                return Err(config_error(
                    "problem.forcing",
                    "convergence runs use the manufactured forcing",
                ));
            }
            (Purpose::MaxReg, Some(ForcingKind::Manufactured)) => {
                return Err(config_error(
                    "problem.forcing",
                    "maximal-regularity sweeps need u0 = 0: use \"random-trig\" or \"zero\"",
                ));
            }
            _ => {}
        }

        let s = &self.solver;
        if s.q.is_empty() {
            return Err(config_error("solver.q", "must not be empty"));
        }
        if let Some(&q) = s.q.iter().find(|&&q| q == 0 || q > MAX_STAGES) {
            return Err(config_error("solver.q", format!("{q} outside 1..={MAX_STAGES}")));
        }
        if s.n_list.is_empty() {
            return Err(config_error("solver.N_list", "must not be empty"));
        }
        if s.n_list[0] == 0 || s.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_error("solver.N_list", "must be positive and strictly increasing"));
        }
        if p.kind == ProblemKind::NonautonomousHeat1d && s.path != PathChoice::Galerkin {
            return Err(config_error(
                "solver.path",
                "time-dependent operators are solved on the galerkin path only",
            ));
        }

        let n = &self.norm;
        if n.p_list.is_empty() {
            return Err(config_error("norm.p_list", "must not be empty"));
        }
        for &pv in &n.p_list {
            let ok = match purpose {
                Purpose::Interp => pv >= 1.0,
                _ => pv > 1.0 && pv.is_finite(),
            };
            if !ok {
                return Err(config_error(
                    "norm.p_list",
                    format!("p = {pv} outside {}", if purpose == Purpose::Interp { "[1, inf]" } else { "(1, inf)" }),
                ));
            }
        }
        match (&n.x_norm, &n.x_weights) {
            (XNormChoice::Weighted, None) => {
                return Err(config_error("norm.x_weights", "required for x_norm = \"weighted\""));
            }
            (XNormChoice::Weighted, Some(w)) => {
                if w.len() != p.dimension {
                    return Err(config_error(
                        "norm.x_weights",
                        format!("expected {} weights, got {}", p.dimension, w.len()),
                    ));
                }
                if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(config_error("norm.x_weights", "weights must be positive"));
                }
            }
            (_, Some(_)) => {
                return Err(config_error("norm.x_weights", "only used with x_norm = \"weighted\""));
            }
            _ => {}
        }

        let qd = &self.quadrature;
        if qd.panels == 0 || qd.points == 0 || qd.points > dgtime::polyquad::MAX_GAUSS_POINTS {
            return Err(config_error("quadrature", "panels and points must be in range"));
        }
        if matches!(qd.quad_a_points, Some(0)) || matches!(qd.forcing_points, Some(0)) {
            return Err(config_error("quadrature", "point counts must be positive"));
        }
        Ok(())
    }

    pub fn x_norm(&self, dim: usize) -> XNorm {
        match &self.norm.x_norm {
            XNormChoice::Euclidean => XNorm::Euclidean,
            XNormChoice::Grid => XNorm::WeightedDiagonal(vec![1.0 / (dim as f64 + 1.0); dim]),
            XNormChoice::Weighted => {
                XNorm::WeightedDiagonal(self.norm.x_weights.clone().unwrap_or_default())
            }
        }
    }

    pub fn norm_quadrature(&self) -> Result<NormQuadrature> {
        Ok(NormQuadrature::new(self.quadrature.panels, self.quadrature.points)?)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}
