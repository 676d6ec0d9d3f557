//! Polynomial machinery on the reference interval `[0, 1]`.
//!
//! Everything here is built once and then only read: right-Radau nodes and
//! the Radau IIA Butcher tableau, barycentric Lagrange bases, shifted Legendre
//! polynomials and Gauss–Legendre rules.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{range_error, DgError, Result};

/// Largest supported number of Radau stages.
pub const MAX_STAGES: usize = 8;

/// Largest supported Gauss rule.
pub const MAX_GAUSS_POINTS: usize = 64;

/// Legendre polynomial `P_n` and its derivative at `x ∈ [-1, 1]`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for m in 1..n {
        let mf = m as f64;
        let p_next = ((2.0 * mf + 1.0) * x * p - mf * p_prev) / (mf + 1.0);
        // P'_{m+1} = P'_{m-1} + (2m+1) P_m, valid up to the endpoints
        let dp_next = dp_prev + (2.0 * mf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// Eigenvalues (ascending) of the symmetric tridiagonal Jacobi matrix.
fn jacobi_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = diag[i];
        if i + 1 < n {
            jac[(i, i + 1)] = offdiag[i];
            jac[(i + 1, i)] = offdiag[i];
        }
    }
    let mut values: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values
}

fn newton_polish(mut x: f64, f: impl Fn(f64) -> (f64, f64)) -> f64 {
    for _ in 0..50 {
        let (value, slope) = f(x);
        if slope == 0.0 {
            break;
        }
        let step = value / slope;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Builds the `points`-point rule; exact for polynomials of degree `2 points - 1`.
    pub fn new(points: usize) -> Result<Self> {
        if points == 0 || points > MAX_GAUSS_POINTS {
            return Err(range_error("gauss points", points, "1..=64"));
        }
        let offdiag: Vec<f64> = (1..points)
            .map(|n| {
                let n = n as f64;
                n / (4.0 * n * n - 1.0).sqrt()
            })
            .collect();
        let roots = jacobi_eigenvalues(&vec![0.0; points], &offdiag);
        let mut nodes = Vec::with_capacity(points);
        let mut weights = Vec::with_capacity(points);
        for root in roots {
            let x = newton_polish(root, |x| legendre_with_derivative(points, x));
            let (_, dp) = legendre_with_derivative(points, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes.push(0.5 * (x + 1.0));
            weights.push(0.5 * w);
        }
        let rule = GaussRule { nodes, weights };
        rule.verify_exactness()?;
        Ok(rule)
    }

    /// Smallest rule integrating polynomials of degree `degree` exactly.
    pub fn exact_for_degree(degree: usize) -> Result<Self> {
        Self::new(degree / 2 + 1)
    }

    fn verify_exactness(&self) -> Result<()> {
        let top = 2 * self.len() - 1;
        for m in 0..=top {
            let approx = self.integrate_unit(|t| t.powi(m as i32));
            let exact = 1.0 / (m as f64 + 1.0);
            if (approx - exact).abs() > 1e-12 {
                return Err(DgError::Validation(format!(
                    "{}-point Gauss rule misses monomial degree {m}: {approx} vs {exact}",
                    self.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫₀¹ f`.
    pub fn integrate_unit(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `∫ₐᵇ f`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let h = b - a;
        h * self.integrate_unit(|s| f(a + h * s))
    }
}

/// Lagrange cardinal polynomials for a set of distinct nodes, evaluated in
/// barycentric (second) form.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(DgError::Degenerate("empty node set".into()));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(DgError::Degenerate("non-finite node".into()));
        }
        let mut weights = Vec::with_capacity(nodes.len());
        for (j, &xj) in nodes.iter().enumerate() {
            let mut prod = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != j {
                    if xj == xm {
                        return Err(DgError::Degenerate(format!(
                            "duplicate interpolation node {xj}"
                        )));
                    }
                    prod *= xj - xm;
                }
            }
            weights.push(1.0 / prod);
        }
        Ok(LagrangeBasis {
            nodes: nodes.to_vec(),
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Polynomial degree of each cardinal function.
    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn barycentric_weights(&self) -> &[f64] {
        &self.weights
    }

    /// All cardinal values `ℓ_j(τ)` written into `out`.
    pub fn eval_into(&self, tau: f64, out: &mut [f64]) {
        if let Some(hit) = self.nodes.iter().position(|&x| x == tau) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[hit] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for ((o, &x), &w) in out.iter_mut().zip(&self.nodes).zip(&self.weights) {
            *o = w / (tau - x);
            denom += *o;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }

    pub fn eval_all(&self, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(tau, &mut out);
        out
    }

    pub fn eval(&self, j: usize, tau: f64) -> f64 {
        self.eval_all(tau)[j]
    }

    /// All derivatives `ℓ_j'(τ)` written into `out`.
    ///
    /// Product-rule form `w_j Σ_{m≠j} Π_{r≠j,m} (τ - x_r)`, which has no
    /// singularity at the nodes.
    pub fn deriv_into(&self, tau: f64, out: &mut [f64]) {
        let n = self.len();
        for j in 0..n {
            let mut sum = 0.0;
            for m in 0..n {
                if m == j {
                    continue;
                }
                let mut prod = 1.0;
                for r in 0..n {
                    if r != j && r != m {
                        prod *= tau - self.nodes[r];
                    }
                }
                sum += prod;
            }
            out[j] = self.weights[j] * sum;
        }
    }

    pub fn deriv_all(&self, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.deriv_into(tau, &mut out);
        out
    }

    pub fn deriv(&self, j: usize, tau: f64) -> f64 {
        self.deriv_all(tau)[j]
    }

    /// `∫ₐᵇ ℓ_j` for every `j`, exact.
    pub fn integrals(&self, a: f64, b: f64) -> Vec<f64> {
        let rule = GaussRule::exact_for_degree(self.degree()).expect("degree within range");
        let mut acc = vec![0.0; self.len()];
        let mut vals = vec![0.0; self.len()];
        let h = b - a;
        for (&s, &w) in rule.nodes().iter().zip(rule.weights()) {
            self.eval_into(a + h * s, &mut vals);
            for (acc, v) in acc.iter_mut().zip(&vals) {
                *acc += h * w * v;
            }
        }
        acc
    }

    pub fn integral(&self, j: usize, a: f64, b: f64) -> f64 {
        self.integrals(a, b)[j]
    }

    /// Interpolant through `values` (one per node) evaluated at `tau`.
    pub fn interpolate(&self, values: &[f64], tau: f64) -> f64 {
        self.eval_all(tau).iter().zip(values).map(|(l, v)| l * v).sum()
    }
}

/// Legendre polynomials shifted to `[0, 1]`, normalized so that `L_i(1) = 1`.
#[derive(Clone, Copy, Debug)]
pub struct LegendreBasis {
    max_degree: usize,
}

impl LegendreBasis {
    pub fn new(max_degree: usize) -> Self {
        LegendreBasis { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn eval(&self, i: usize, tau: f64) -> f64 {
        legendre_with_derivative(i, 2.0 * tau - 1.0).0
    }

    pub fn deriv(&self, i: usize, tau: f64) -> f64 {
        2.0 * legendre_with_derivative(i, 2.0 * tau - 1.0).1
    }

    /// `L_0(τ), …, L_max(τ)`.
    pub fn eval_all(&self, tau: f64) -> Vec<f64> {
        let x = 2.0 * tau - 1.0;
        let mut out = Vec::with_capacity(self.max_degree + 1);
        out.push(1.0);
        if self.max_degree >= 1 {
            out.push(x);
        }
        for m in 1..self.max_degree {
            let mf = m as f64;
            let next = ((2.0 * mf + 1.0) * x * out[m] - mf * out[m - 1]) / (mf + 1.0);
            out.push(next);
        }
        out
    }

    /// `‖L_i‖²` on `[0, 1]`.
    pub fn norm_sq(&self, i: usize) -> f64 {
        1.0 / (2.0 * i as f64 + 1.0)
    }
}

/// Radau IIA tableau: right-Radau nodes `0 < c_1 < … < c_q = 1` with
/// `a_ij = ∫₀^{c_i} ℓ_j` and `b_j = a_qj`.
#[derive(Clone, Debug)]
pub struct RadauTableau {
    q: usize,
    c: Vec<f64>,
    a: DMatrix<f64>,
    b: Vec<f64>,
    lagrange_integrals: Vec<f64>,
    basis: LagrangeBasis,
}

fn right_radau_nodes(q: usize) -> Vec<f64> {
    if q == 1 {
        return vec![1.0];
    }
    // Interior nodes are the Gauss–Jacobi points for the weight (1 - s),
    // i.e. roots of (P_q - P_{q-1}) / (s - 1) on [-1, 1].
    let m = q - 1;
    let diag: Vec<f64> = (0..m)
        .map(|n| {
            let n = n as f64;
            -1.0 / ((2.0 * n + 1.0) * (2.0 * n + 3.0))
        })
        .collect();
    let offdiag: Vec<f64> = (1..m)
        .map(|n| {
            let n = n as f64;
            (n * (n + 1.0)).sqrt() / (2.0 * n + 1.0)
        })
        .collect();
    let mut nodes: Vec<f64> = jacobi_eigenvalues(&diag, &offdiag)
        .into_iter()
        .map(|s| {
            let s = newton_polish(s, |x| {
                let (p, dp) = legendre_with_derivative(q, x);
                let (pm, dpm) = legendre_with_derivative(q - 1, x);
                (p - pm, dp - dpm)
            });
            0.5 * (s + 1.0)
        })
        .collect();
    nodes.push(1.0);
    nodes
}

fn closed_form_nodes(q: usize) -> Option<Vec<f64>> {
    let s6 = 6f64.sqrt();
    match q {
        1 => Some(vec![1.0]),
        2 => Some(vec![1.0 / 3.0, 1.0]),
        3 => Some(vec![(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0]),
        _ => None,
    }
}

impl RadauTableau {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 || q > MAX_STAGES {
            return Err(range_error("radau stages q", q, "1..=8"));
        }
        let c = right_radau_nodes(q);
        if let Some(reference) = closed_form_nodes(q) {
            for (x, y) in c.iter().zip(&reference) {
                if (x - y).abs() > 1e-14 {
                    return Err(DgError::Validation(format!(
                        "radau node {x} deviates from closed form {y}"
                    )));
                }
            }
        }
        let basis = LagrangeBasis::new(&c)?;
        let mut a = DMatrix::zeros(q, q);
        for (i, &ci) in c.iter().enumerate() {
            for (j, v) in basis.integrals(0.0, ci).into_iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        let b: Vec<f64> = (0..q).map(|j| a[(q - 1, j)]).collect();
        let lagrange_integrals = basis.integrals(0.0, 1.0);
        if let Some(j) = b.iter().position(|&w| w <= 0.0) {
            return Err(DgError::Validation(format!("radau weight b_{j} is not positive")));
        }
        Ok(RadauTableau {
            q,
            c,
            a,
            b,
            lagrange_integrals,
            basis,
        })
    }

    pub fn stages(&self) -> usize {
        self.q
    }

    pub fn nodes(&self) -> &[f64] {
        &self.c
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    /// `∫₀¹ ℓ_j` computed directly from the basis; agrees with `b_j`.
    pub fn lagrange_integrals(&self) -> &[f64] {
        &self.lagrange_integrals
    }

    /// Lagrange basis on the `q` Radau nodes.
    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    /// Quadrature `Σ b_j g(c_j)`, exact up to degree `2q - 2`.
    pub fn quadrature(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.c.iter().zip(&self.b).map(|(&c, &b)| b * g(c)).sum()
    }
}

/// Convenience wrappers mirroring the free-function style used by callers.
pub fn radau_tableau(q: usize) -> Result<RadauTableau> {
    RadauTableau::new(q)
}

pub fn lagrange_basis(nodes: &[f64]) -> Result<LagrangeBasis> {
    LagrangeBasis::new(nodes)
}

pub fn gauss_rule(points: usize) -> Result<GaussRule> {
    GaussRule::new(points)
}
