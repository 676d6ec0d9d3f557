//! Spatial operator models: constant matrices `A` and time-dependent families
//! `A(t) = a(t)·A₀ + B(t)`.
//!
//! Everything is dense and desk-scale. Factorizations of shifted and block
//! systems are cached per key behind a mutex, so a model can be shared by
//! concurrent runs.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use log::warn;
use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{range_error, DgError, Result};

type Factor = Arc<LU<f64, Dyn, Dyn>>;

/// Range of the spectrum of a model, found by a dense eigensolve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumSummary {
    pub min_real: f64,
    pub max_real: f64,
    pub max_modulus: f64,
}

fn spectrum_of(matrix: &DMatrix<f64>, symmetric: bool) -> SpectrumSummary {
    if symmetric {
        let values = matrix.clone().symmetric_eigenvalues();
        SpectrumSummary {
            min_real: values.min(),
            max_real: values.max(),
            max_modulus: values.amax(),
        }
    } else {
        let values = matrix.complex_eigenvalues();
        let mut s = SpectrumSummary {
            min_real: f64::INFINITY,
            max_real: f64::NEG_INFINITY,
            max_modulus: 0.0,
        };
        for z in values.iter() {
            s.min_real = s.min_real.min(z.re);
            s.max_real = s.max_real.max(z.re);
            s.max_modulus = s.max_modulus.max(z.re.hypot(z.im));
        }
        s
    }
}

fn is_symmetric(matrix: &DMatrix<f64>) -> bool {
    let scale = matrix.amax().max(f64::MIN_POSITIVE);
    (matrix - matrix.transpose()).amax() <= 1e-14 * scale
}

fn key_of(values: impl IntoIterator<Item = f64>) -> Vec<u64> {
    values.into_iter().map(f64::to_bits).collect()
}

/// Constant operator `A` on `R^d` with spectrum in the open right half-plane.
pub struct OperatorModel {
    matrix: DMatrix<f64>,
    label: String,
    symmetric: bool,
    spectrum: SpectrumSummary,
    factors: Mutex<HashMap<Vec<u64>, Factor>>,
}

impl fmt::Debug for OperatorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorModel")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("symmetric", &self.symmetric)
            .field("spectrum", &self.spectrum)
            .finish()
    }
}

impl OperatorModel {
    /// Wraps a square matrix after validating that its spectrum lies in the
    /// open right half-plane.
    pub fn from_matrix(matrix: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(DgError::Validation(format!(
                "operator must be a nonempty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(DgError::Validation("operator has non-finite entries".into()));
        }
        let symmetric = is_symmetric(&matrix);
        let spectrum = spectrum_of(&matrix, symmetric);
        if !(spectrum.min_real > 0.0) {
            return Err(DgError::ModelRejected(format!(
                "spectrum reaches Re λ = {:e}; need the open right half-plane",
                spectrum.min_real
            )));
        }
        Ok(OperatorModel {
            matrix,
            label: label.into(),
            symmetric,
            spectrum,
            factors: Mutex::new(HashMap::new()),
        })
    }

    /// `-ν·Δ_h` on `d` interior points of `(0, 1)` with Dirichlet ends,
    /// `h = 1/(d+1)`.
    pub fn laplacian_1d(d: usize, diffusion: f64) -> Result<Self> {
        if d == 0 {
            return Err(range_error("dimension d", d, ">= 1"));
        }
        if !(diffusion > 0.0 && diffusion.is_finite()) {
            return Err(DgError::Validation(format!(
                "diffusion must be positive, got {diffusion}"
            )));
        }
        let h = 1.0 / (d as f64 + 1.0);
        let s = diffusion / (h * h);
        let matrix = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                2.0 * s
            } else if i.abs_diff(j) == 1 {
                -s
            } else {
                0.0
            }
        });
        Self::from_matrix(matrix, format!("laplacian_1d(d={d}, nu={diffusion})"))
    }

    /// Unit-diffusion 1D Laplacian plus `skew` on the first superdiagonal.
    pub fn nonnormal_model(d: usize, skew: f64) -> Result<Self> {
        if d < 2 {
            return Err(range_error("dimension d", d, ">= 2"));
        }
        let mut matrix = Self::laplacian_1d(d, 1.0)?.matrix;
        for i in 0..d - 1 {
            matrix[(i, i + 1)] += skew;
        }
        Self::from_matrix(matrix, format!("nonnormal(d={d}, skew={skew})"))
    }

    /// Reads the dense text format: the dimension `d` on the first line, then
    /// `d` rows of `d` whitespace-separated numbers. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse_dense(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(DgError::Parse {
            line: 1,
            message: "empty matrix file".into(),
        })?;
        let d: usize = header.parse().map_err(|_| DgError::Parse {
            line,
            message: format!("expected dimension, found {header:?}"),
        })?;
        let mut matrix = DMatrix::zeros(d, d);
        for row in 0..d {
            let (line, text) = lines.next().ok_or(DgError::Parse {
                line: 0,
                message: format!("expected {d} rows, found {row}"),
            })?;
            let values: Vec<f64> = text
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| DgError::Parse {
                    line,
                    message: "non-numeric entry".into(),
                })?;
            if values.len() != d {
                return Err(DgError::Parse {
                    line,
                    message: format!("expected {d} entries, found {}", values.len()),
                });
            }
            for (col, v) in values.into_iter().enumerate() {
                matrix[(row, col)] = v;
            }
        }
        if let Some((line, _)) = lines.next() {
            return Err(DgError::Parse {
                line,
                message: "trailing data after matrix rows".into(),
            });
        }
        Self::from_matrix(matrix, "matrix-file")
    }

    pub fn read_dense(path: &std::path::Path) -> Result<Self> {
        Self::parse_dense(&std::fs::read_to_string(path)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn spectrum(&self) -> SpectrumSummary {
        self.spectrum
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    fn cached_factor(&self, key: Vec<u64>, build: impl FnOnce() -> DMatrix<f64>) -> Factor {
        if let Some(f) = self.factors.lock().unwrap().get(&key) {
            return f.clone();
        }
        let factor = Arc::new(build().lu());
        self.factors
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(factor)
            .clone()
    }

    /// Solves `(α I + β A) x = rhs`.
    pub fn solve_shifted(&self, alpha: f64, beta: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let lu = self.cached_factor(key_of([0.0, alpha, beta]), || {
            &self.matrix * beta + DMatrix::identity(self.dim(), self.dim()) * alpha
        });
        lu.solve(rhs)
            .ok_or_else(|| DgError::Validation(format!("αI + βA singular for α={alpha}, β={beta}")))
    }

    /// `M ⊗ I + k·C ⊗ A` for `q × q` matrices `M` and `C`; unknowns are
    /// stacked stage by stage.
    pub fn block_matrix(&self, mass: &DMatrix<f64>, coupling: &DMatrix<f64>, k: f64) -> DMatrix<f64> {
        let q = mass.nrows();
        let d = self.dim();
        let mut out = DMatrix::zeros(q * d, q * d);
        for i in 0..q {
            for j in 0..q {
                let mut block = out.view_mut((i * d, j * d), (d, d));
                block += &self.matrix * (k * coupling[(i, j)]);
                for r in 0..d {
                    block[(r, r)] += mass[(i, j)];
                }
            }
        }
        out
    }

    /// Solves `(M ⊗ I + k·C ⊗ A) x = rhs`. `None` when the system is singular.
    pub fn solve_block(
        &self,
        mass: &DMatrix<f64>,
        coupling: &DMatrix<f64>,
        k: f64,
        rhs: &DVector<f64>,
    ) -> Option<DVector<f64>> {
        let key = key_of(
            [1.0, k]
                .into_iter()
                .chain(mass.iter().copied())
                .chain(coupling.iter().copied()),
        );
        let lu = self.cached_factor(key, || self.block_matrix(mass, coupling, k));
        lu.solve(rhs)
    }
}

/// Scalar modulation `a(t)` of a time-dependent model.
#[derive(Clone)]
pub struct Modulation {
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    derivative: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    label: String,
}

impl fmt::Debug for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Modulation({})", self.label)
    }
}

impl Modulation {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        label: impl Into<String>,
    ) -> Self {
        Modulation {
            value: Arc::new(value),
            derivative,
            label: label.into(),
        }
    }

    pub fn constant(a: f64) -> Self {
        Self::new(move |_| a, Some(Arc::new(|_| 0.0)), format!("{a}"))
    }

    /// `a(t) = intercept + slope·t`.
    pub fn affine(intercept: f64, slope: f64) -> Self {
        Self::new(
            move |t| intercept + slope * t,
            Some(Arc::new(move |_| slope)),
            format!("{intercept}+{slope}t"),
        )
    }

    pub fn at(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    /// `a'(t)`, analytic when supplied, else a central difference.
    pub fn derivative_at(&self, t: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(t),
            None => {
                let h = 1e-6 * t.abs().max(1.0);
                (self.at(t + h) - self.at(t - h)) / (2.0 * h)
            }
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Matrix-valued drift `B(t)`.
pub type DriftFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// Declared constants of the time-dependent model: `L` in
/// `‖(A(t) - A(s))v‖ ≤ L|t - s| ‖A(r)v‖` and `c` in `‖A(t)v‖ ≤ c ‖A(s)v‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeclaredBounds {
    pub lipschitz: f64,
    pub equivalence: f64,
}

const MODULATION_SAMPLES: usize = 1024;

impl DeclaredBounds {
    /// Bounds for a pure modulation `a(t)·A₀` on `[0, horizon]`:
    /// `L = sup|a'| / inf a`, `c = sup a / inf a`, found by sampling.
    pub fn from_modulation(modulation: &Modulation, horizon: f64) -> Self {
        let (mut lo, mut hi, mut slope) = (f64::INFINITY, 0.0f64, 0.0f64);
        for i in 0..=MODULATION_SAMPLES {
            let t = horizon * i as f64 / MODULATION_SAMPLES as f64;
            let a = modulation.at(t);
            lo = lo.min(a);
            hi = hi.max(a);
            slope = slope.max(modulation.derivative_at(t).abs());
        }
        DeclaredBounds {
            lipschitz: slope / lo,
            equivalence: hi / lo,
        }
    }
}

/// Outcome of the sampled Lipschitz check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzReport {
    /// Largest observed `‖(A(t)-A(s))v‖ / (L|t-s| ‖A(0)v‖)`.
    pub worst_ratio: f64,
    pub violations: usize,
}

/// `A(t) = a(t)·A₀ + B(t)` on `[0, T]`.
pub struct NonautonomousModel {
    base: Arc<OperatorModel>,
    modulation: Modulation,
    drift: Option<DriftFn>,
    horizon: f64,
    bounds: DeclaredBounds,
}

impl fmt::Debug for NonautonomousModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonautonomousModel")
            .field("base", &self.base.label())
            .field("modulation", &self.modulation)
            .field("drift", &self.drift.is_some())
            .field("horizon", &self.horizon)
            .field("bounds", &self.bounds)
            .finish()
    }
}

const LIPSCHITZ_SLACK: f64 = 1.05;

impl NonautonomousModel {
    pub fn new(
        base: Arc<OperatorModel>,
        modulation: Modulation,
        drift: Option<DriftFn>,
        horizon: f64,
        bounds: DeclaredBounds,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(range_error("horizon T", horizon, "(0, inf)"));
        }
        for i in 0..=MODULATION_SAMPLES {
            let t = horizon * i as f64 / MODULATION_SAMPLES as f64;
            let a = modulation.at(t);
            if !(a > 0.0 && a.is_finite()) {
                return Err(DgError::Validation(format!(
                    "modulation a({t}) = {a} must be positive"
                )));
            }
        }
        let model = NonautonomousModel {
            base,
            modulation,
            drift,
            horizon,
            bounds,
        };
        if model.drift.is_some() {
            for i in 0..=8 {
                let t = horizon * i as f64 / 8.0;
                OperatorModel::from_matrix(model.matrix_at(t), "A(t)")?;
            }
        }
        let report = model.check_lipschitz();
        if report.violations > 0 {
            warn!(
                "declared Lipschitz constant {} violated on {} probes (worst ratio {:.3})",
                bounds.lipschitz, report.violations, report.worst_ratio
            );
        }
        Ok(model)
    }

    /// `a(t)·base` with bounds derived from the modulation.
    pub fn modulated(base: Arc<OperatorModel>, modulation: Modulation, horizon: f64) -> Result<Self> {
        let bounds = DeclaredBounds::from_modulation(&modulation, horizon);
        Self::new(base, modulation, None, horizon, bounds)
    }

    /// The constant family `A(t) ≡ base`.
    pub fn frozen(base: Arc<OperatorModel>, horizon: f64) -> Result<Self> {
        Self::modulated(base, Modulation::constant(1.0), horizon)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &Arc<OperatorModel> {
        &self.base
    }

    pub fn modulation(&self) -> &Modulation {
        &self.modulation
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn bounds(&self) -> DeclaredBounds {
        self.bounds
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    pub fn apply_at(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut y = self.base.apply(x) * self.modulation.at(t);
        if let Some(drift) = &self.drift {
            y += drift(t) * x;
        }
        y
    }

    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        let mut m = self.base.matrix() * self.modulation.at(t);
        if let Some(drift) = &self.drift {
            m += drift(t);
        }
        m
    }

    /// Samples `‖(A(t)-A(s))v‖ ≤ 1.05·L|t-s|·‖A(0)v‖` on a grid of times and
    /// a fixed family of probe vectors.
    pub fn check_lipschitz(&self) -> LipschitzReport {
        let d = self.dim();
        let probes: Vec<DVector<f64>> = (1..=4)
            .map(|m| {
                DVector::from_fn(d, |r, _| {
                    ((m * (r + 1)) as f64 * 0.73 + 0.31 * m as f64).sin()
                })
            })
            .collect();
        let times: Vec<f64> = (0..=8).map(|i| self.horizon * i as f64 / 8.0).collect();
        let mut report = LipschitzReport {
            worst_ratio: 0.0,
            violations: 0,
        };
        for v in &probes {
            let reference = self.apply_at(0.0, v).norm();
            let at: Vec<DVector<f64>> = times.iter().map(|&t| self.apply_at(t, v)).collect();
            for i in 0..times.len() {
                for j in i + 1..times.len() {
                    let lhs = (&at[i] - &at[j]).norm();
                    let rhs = self.bounds.lipschitz * (times[j] - times[i]) * reference;
                    let ratio = if rhs > 0.0 {
                        lhs / rhs
                    } else if lhs > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    };
                    report.worst_ratio = report.worst_ratio.max(ratio);
                    if ratio > LIPSCHITZ_SLACK {
                        report.violations += 1;
                    }
                }
            }
        }
        report
    }
}

/// Dense LU solve; `None` if singular.
pub fn solve_dense(matrix: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    matrix.lu().solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_point_laplacian() {
        let a = OperatorModel::laplacian_1d(1, 1.0).unwrap();
        assert_eq!(a.matrix()[(0, 0)], 8.0);
        assert!(a.is_symmetric());
    }

    #[test]
    fn laplacian_eigenvalues_match_closed_form() {
        let a = OperatorModel::laplacian_1d(3, 1.0).unwrap();
        let h = 0.25;
        let mut expect: Vec<f64> = (1..=3)
            .map(|j| 4.0 * (j as f64 * std::f64::consts::PI / 8.0).sin().powi(2) / (h * h))
            .collect();
        expect.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = a.matrix().clone().symmetric_eigenvalues().iter().copied().collect();
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expect) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-11);
        }
        assert_abs_diff_eq!(a.spectrum().min_real, expect[0], epsilon = 1e-11);
    }

    #[test]
    fn laplacian_validation() {
        assert!(matches!(
            OperatorModel::laplacian_1d(4, 0.0),
            Err(DgError::Validation(_))
        ));
        assert!(OperatorModel::laplacian_1d(4, -1.0).is_err());
        assert!(OperatorModel::laplacian_1d(0, 1.0).is_err());
    }

    #[test]
    fn shifted_solve_identity_and_residual() {
        let a = OperatorModel::nonnormal_model(6, 3.0).unwrap();
        let r = DVector::from_fn(6, |i, _| (i as f64 * 1.3).cos());
        assert_eq!(a.solve_shifted(1.0, 0.0, &r).unwrap(), r);
        let x = a.solve_shifted(2.0, 0.1, &r).unwrap();
        let back = &x * 2.0 + a.apply(&x) * 0.1;
        assert!((back - &r).norm() <= 1e-10 * r.norm());
    }

    #[test]
    fn nonnormal_reduces_to_laplacian() {
        let a = OperatorModel::nonnormal_model(5, 0.0).unwrap();
        let l = OperatorModel::laplacian_1d(5, 1.0).unwrap();
        assert_eq!(a.matrix(), l.matrix());
        let b = OperatorModel::nonnormal_model(5, 2.0).unwrap();
        assert_ne!(b.matrix(), &b.matrix().transpose());
        assert!(!b.is_symmetric());
    }

    #[test]
    fn nonnormal_two_by_two_spectrum() {
        let a = OperatorModel::nonnormal_model(2, 1.0).unwrap();
        // [[18, -8], [-9, 18]]: λ = 18 ± √72
        let (p, q, r, s) = (18.0, -8.0, -9.0, 18.0);
        let tr: f64 = p + s;
        let det = p * s - q * r;
        let disc = tr * tr / 4.0 - det;
        let lo = tr / 2.0 - disc.sqrt();
        let hi = tr / 2.0 + disc.sqrt();
        assert!(lo > 0.0);
        assert_abs_diff_eq!(a.spectrum().min_real, lo, epsilon = 1e-11);
        assert_abs_diff_eq!(a.spectrum().max_real, hi, epsilon = 1e-11);
    }

    #[test]
    fn nonnormal_rejects_left_spectrum() {
        assert!(matches!(
            OperatorModel::nonnormal_model(2, -40.0),
            Err(DgError::ModelRejected(_))
        ));
    }

    #[test]
    fn block_solve_residual() {
        let a = OperatorModel::nonnormal_model(4, 1.5).unwrap();
        let mass = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.3, 0.8]);
        let coupling = DMatrix::from_row_slice(2, 2, &[5.0 / 12.0, -1.0 / 12.0, 0.75, 0.25]);
        let rhs = DVector::from_fn(8, |i, _| (i as f64).sin() + 0.5);
        let x = a.solve_block(&mass, &coupling, 0.1, &rhs).unwrap();
        let res = a.block_matrix(&mass, &coupling, 0.1) * &x - &rhs;
        assert!(res.norm() <= 1e-10 * rhs.norm());
        // second call hits the cache and agrees bit for bit
        assert_eq!(a.solve_block(&mass, &coupling, 0.1, &rhs).unwrap(), x);
    }

    #[test]
    fn dense_format_roundtrip() {
        let text = "# user matrix\n2\n4 -1\n-1 4\n";
        let a = OperatorModel::parse_dense(text).unwrap();
        assert_eq!(a.matrix(), &DMatrix::from_row_slice(2, 2, &[4.0, -1.0, -1.0, 4.0]));
        assert!(matches!(
            OperatorModel::parse_dense("2\n1 2\n3\n"),
            Err(DgError::Parse { line: 3, .. })
        ));
        assert!(OperatorModel::parse_dense("x\n").is_err());
        assert!(OperatorModel::parse_dense("1\n1\n2\n").is_err());
        assert!(matches!(
            OperatorModel::parse_dense("1\n-3\n"),
            Err(DgError::ModelRejected(_))
        ));
    }

    #[test]
    fn constant_family_reduces_to_base() {
        let base = Arc::new(OperatorModel::laplacian_1d(4, 1.0).unwrap());
        let m = NonautonomousModel::frozen(base.clone(), 1.0).unwrap();
        let x = DVector::from_fn(4, |i, _| i as f64 - 1.5);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(m.apply_at(t, &x), base.apply(&x));
        }
        assert_eq!(m.bounds().lipschitz, 0.0);
        assert_eq!(m.bounds().equivalence, 1.0);
    }

    #[test]
    fn affine_modulation_bounds() {
        let base = Arc::new(OperatorModel::laplacian_1d(5, 1.0).unwrap());
        let m = NonautonomousModel::modulated(base.clone(), Modulation::affine(1.0, 0.5), 1.0).unwrap();
        assert_abs_diff_eq!(m.bounds().lipschitz, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(m.bounds().equivalence, 1.5, epsilon = 1e-14);
        let v = DVector::from_fn(5, |i, _| (i as f64).cos());
        let (t, s) = (0.8, 0.2);
        let diff = (m.apply_at(t, &v) - m.apply_at(s, &v)).norm();
        assert_abs_diff_eq!(diff, 0.5 * (t - s) * base.apply(&v).norm(), epsilon = 1e-10);
        let report = m.check_lipschitz();
        assert_eq!(report.violations, 0);
        assert!(report.worst_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn understated_lipschitz_is_flagged() {
        let base = Arc::new(OperatorModel::laplacian_1d(3, 1.0).unwrap());
        let bounds = DeclaredBounds {
            lipschitz: 0.1,
            equivalence: 1.5,
        };
        let m = NonautonomousModel::new(base, Modulation::affine(1.0, 0.5), None, 1.0, bounds).unwrap();
        assert!(m.check_lipschitz().violations > 0);
    }

    #[test]
    fn nonpositive_modulation_rejected() {
        let base = Arc::new(OperatorModel::laplacian_1d(3, 1.0).unwrap());
        assert!(matches!(
            NonautonomousModel::modulated(base, Modulation::affine(1.0, -2.0), 1.0),
            Err(DgError::Validation(_))
        ));
    }

    #[test]
    fn drift_enters_matrix() {
        let base = Arc::new(OperatorModel::laplacian_1d(2, 1.0).unwrap());
        let drift: DriftFn = Arc::new(|t| DMatrix::from_row_slice(2, 2, &[0.0, t, -t, 0.0]));
        let bounds = DeclaredBounds {
            lipschitz: 1.0,
            equivalence: 1.1,
        };
        let m = NonautonomousModel::new(base, Modulation::constant(1.0), Some(drift), 1.0, bounds).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(m.matrix_at(0.5) * &x, m.apply_at(0.5, &x));
        assert_eq!(m.matrix_at(0.5)[(0, 1)], -9.0 + 0.5);
    }
}
