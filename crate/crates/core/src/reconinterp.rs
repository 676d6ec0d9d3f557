//! The reconstruction `ŵ` of a piecewise polynomial and the orthogonal
//! interpolant `ũ` of a smooth function.
//!
//! `ŵ` has degree `q` on each slab and interpolates `w` at the Radau nodes
//! together with the left limit `w_n` at `t_n`, so it is continuous.
//! `ũ` has degree `q - 1`, matches `u(t_{n+1})` and is `L²`-orthogonal to
//! polynomials of degree `q - 2` on each slab:
//!
//! ```text
//! ũ = Σ_{i<q-1} v_i L_i + L_{q-1} (u(t_{n+1}) - Σ_{i<q-1} v_i),
//! v_i = (2i + 1) ∫₀¹ L_i(τ) u(t_n + kτ) dτ.
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dgsolve::DGSolution;
use crate::error::{DgError, Result};
use crate::polyquad::{GaussRule, LegendreBasis, RadauTableau};
use crate::timefun::{Continuity, MeshFunction, NodeLayout, SlabBasis, TimeMesh};

/// `ŵ` together with the function it was built from.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    hat: MeshFunction,
    source: MeshFunction,
}

impl Reconstruction {
    /// Degree `q`, continuous, nodal on `{0, c_1..c_q}`.
    pub fn hat(&self) -> &MeshFunction {
        &self.hat
    }

    pub fn into_hat(self) -> MeshFunction {
        self.hat
    }

    pub fn source(&self) -> &MeshFunction {
        &self.source
    }
}

fn check_radau(w: &MeshFunction) -> Result<RadauTableau> {
    if w.basis().layout() != NodeLayout::Radau {
        return Err(DgError::Validation(
            "reconstruction expects a function stored at the Radau nodes".into(),
        ));
    }
    RadauTableau::new(w.basis().stages())
}

/// Builds `ŵ` from `w` of degree `q - 1` and the value `w0` attached at `t = 0`.
pub fn reconstruct(w: &MeshFunction, w0: &DVector<f64>) -> Result<Reconstruction> {
    let tableau = check_radau(w)?;
    if w0.len() != w.dim() {
        return Err(DgError::Validation(format!(
            "initial value has length {}, expected {}",
            w0.len(),
            w.dim()
        )));
    }
    let q = tableau.stages();
    let d = w.dim();
    let basis = Arc::new(SlabBasis::new(NodeLayout::RadauWithLeft, &tableau));
    let mut previous = w0.clone();
    let coeffs = w
        .nodal_blocks()
        .iter()
        .map(|block| {
            let mut hat = DMatrix::zeros(d, q + 1);
            hat.set_column(0, &previous);
            hat.columns_mut(1, q).copy_from(block);
            previous = block.column(q - 1).into_owned();
            hat
        })
        .collect();
    let hat = MeshFunction::new(*w.mesh(), basis, coeffs, Continuity::Continuous, w0.clone())?;
    Ok(Reconstruction {
        hat,
        source: w.clone(),
    })
}

/// `Û` for a dG solution, using `U(0) = u₀`.
pub fn reconstruct_solution(sol: &DGSolution) -> Result<Reconstruction> {
    let u = sol.solution();
    reconstruct(u, u.left_value_at_zero())
}

/// Per-slab Legendre coefficients `(2i + 1) ∫₀¹ L_i v` of a mesh function,
/// `i = 0..=degree`, as `d × (degree + 1)` blocks. Exact.
pub fn legendre_coefficients(v: &MeshFunction) -> Vec<DMatrix<f64>> {
    let m = v.degree();
    let legendre = LegendreBasis::new(m);
    let gauss = GaussRule::new(m + 1).expect("degree within gauss range");
    (0..v.mesh().num_slabs())
        .map(|n| {
            let mut out = DMatrix::zeros(v.dim(), m + 1);
            for (&tau, &w) in gauss.nodes().iter().zip(gauss.weights()) {
                let value = v.eval_slab(n, tau);
                for (i, l) in legendre.eval_all(tau).into_iter().enumerate() {
                    out.column_mut(i).axpy((2 * i + 1) as f64 * w * l, &value, 1.0);
                }
            }
            out
        })
        .collect()
}

/// `ũ` with its Legendre coefficients `v_0..v_{q-2}` per slab.
#[derive(Clone, Debug)]
pub struct OrthoInterpolant {
    tilde: MeshFunction,
    legendre_coeffs: Vec<DMatrix<f64>>,
}

impl OrthoInterpolant {
    /// Degree `q - 1`, discontinuous, nodal on `c_1..c_q`, value `u(0)` at zero.
    pub fn tilde(&self) -> &MeshFunction {
        &self.tilde
    }

    pub fn into_tilde(self) -> MeshFunction {
        self.tilde
    }

    /// `d × (q - 1)` block of `v_i` on slab `n` (empty for `q = 1`).
    pub fn legendre_coeffs(&self, n: usize) -> &DMatrix<f64> {
        &self.legendre_coeffs[n]
    }
}

/// `ũ` with the Legendre coefficients taken by a `(q + 4)`-point Gauss rule.
pub fn ortho_interpolate<F>(u: &F, mesh: &TimeMesh, q: usize) -> Result<OrthoInterpolant>
where
    F: Fn(f64) -> DVector<f64> + ?Sized,
{
    ortho_interpolate_with(u, mesh, q, &GaussRule::new(q + 4)?)
}

pub fn ortho_interpolate_with<F>(
    u: &F,
    mesh: &TimeMesh,
    q: usize,
    gauss: &GaussRule,
) -> Result<OrthoInterpolant>
where
    F: Fn(f64) -> DVector<f64> + ?Sized,
{
    let tableau = RadauTableau::new(q)?;
    let basis = Arc::new(SlabBasis::new(NodeLayout::Radau, &tableau));
    let legendre = LegendreBasis::new(q - 1);
    let u0 = u(0.0);
    let d = u0.len();
    let at_gauss: Vec<Vec<f64>> = gauss.nodes().iter().map(|&t| legendre.eval_all(t)).collect();
    let at_nodes: Vec<Vec<f64>> = tableau.nodes().iter().map(|&c| legendre.eval_all(c)).collect();

    let mut legendre_coeffs = Vec::with_capacity(mesh.num_slabs());
    let mut blocks = Vec::with_capacity(mesh.num_slabs());
    for n in 0..mesh.num_slabs() {
        let mut v = DMatrix::zeros(d, q - 1);
        for (g, (&tau, &w)) in gauss.nodes().iter().zip(gauss.weights()).enumerate() {
            let value = u(mesh.time(n, tau));
            for i in 0..q - 1 {
                v.column_mut(i)
                    .axpy((2 * i + 1) as f64 * w * at_gauss[g][i], &value, 1.0);
            }
        }
        let mut top = u(mesh.point(n + 1));
        for i in 0..q - 1 {
            top -= v.column(i);
        }
        let mut block = DMatrix::zeros(d, q);
        for (j, l) in at_nodes.iter().enumerate() {
            let mut col = block.column_mut(j);
            col.axpy(l[q - 1], &top, 0.0);
            for i in 0..q - 1 {
                col.axpy(l[i], &v.column(i), 1.0);
            }
        }
        legendre_coeffs.push(v);
        blocks.push(block);
    }
    let tilde = MeshFunction::new(*mesh, basis, blocks, Continuity::Discontinuous, u0)?;
    Ok(OrthoInterpolant {
        tilde,
        legendre_coeffs,
    })
}

/// The composition `u ↦ (ũ)^`, with `u(0)` attached at zero.
pub fn hat_tilde<F>(u: &F, mesh: &TimeMesh, q: usize) -> Result<MeshFunction>
where
    F: Fn(f64) -> DVector<f64> + ?Sized,
{
    let tilde = ortho_interpolate(u, mesh, q)?;
    Ok(reconstruct(tilde.tilde(), &u(0.0))?.into_hat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timefun::backward_difference;
    use approx::assert_abs_diff_eq;

    fn scalar(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn q1_reconstruction_is_piecewise_linear() {
        let mesh = TimeMesh::new(1.0, 4).unwrap();
        let w = MeshFunction::from_slab_fn(
            mesh,
            SlabBasis::radau(1).unwrap(),
            Continuity::Discontinuous,
            scalar(2.0),
            |n: usize, _: f64| scalar((n * n) as f64),
        )
        .unwrap();
        let hat = reconstruct(&w, &scalar(2.0)).unwrap().into_hat();
        assert_eq!(hat.degree(), 1);
        // slab 0 goes from 2 to 0, slab 2 from 1 to 4
        assert_abs_diff_eq!(hat.eval_slab(0, 0.25)[0], 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(hat.eval_slab(2, 0.5)[0], 2.5, epsilon = 1e-14);
    }

    #[test]
    fn reconstruction_interpolates() {
        let mesh = TimeMesh::new(2.0, 3).unwrap();
        let w = MeshFunction::from_slab_fn(
            mesh,
            SlabBasis::radau(3).unwrap(),
            Continuity::Discontinuous,
            scalar(0.3),
            |n: usize, tau: f64| scalar((n as f64 + 1.0) * tau * tau - tau),
        )
        .unwrap();
        let hat = reconstruct(&w, &scalar(0.3)).unwrap().into_hat();
        let tableau = RadauTableau::new(3).unwrap();
        for n in 0..3 {
            assert_abs_diff_eq!(hat.eval_slab(n, 0.0)[0], w.left_limit(n)[0], epsilon = 1e-12);
            for &c in tableau.nodes() {
                assert_abs_diff_eq!(hat.eval_slab(n, c)[0], w.eval_slab(n, c)[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn continuous_low_degree_is_reproduced() {
        let mesh = TimeMesh::new(1.0, 5).unwrap();
        let f = |t: f64| scalar(1.0 - 2.0 * t + 3.0 * t * t);
        let w = MeshFunction::from_slab_fn(
            mesh,
            SlabBasis::radau(3).unwrap(),
            Continuity::Continuous,
            f(0.0),
            |n: usize, tau: f64| f(mesh.time(n, tau)),
        )
        .unwrap();
        let hat = reconstruct(&w, &f(0.0)).unwrap().into_hat();
        for n in 0..5 {
            for tau in [0.0, 0.17, 0.5, 0.93, 1.0] {
                assert_abs_diff_eq!(hat.eval_slab(n, tau)[0], w.eval_slab(n, tau)[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn difference_commutes_with_reconstruction() {
        let mesh = TimeMesh::new(1.0, 4).unwrap();
        let zero = DVector::zeros(2);
        let w = MeshFunction::from_slab_fn(
            mesh,
            SlabBasis::radau(2).unwrap(),
            Continuity::Discontinuous,
            zero.clone(),
            |n: usize, tau: f64| DVector::from_vec(vec![(n as f64 + tau).sin(), tau * n as f64]),
        )
        .unwrap();
        let lhs = reconstruct(&backward_difference(&w), &zero).unwrap().into_hat();
        let rhs = backward_difference(reconstruct(&w, &zero).unwrap().hat());
        for n in 0..4 {
            assert!((lhs.nodal(n) - rhs.nodal(n)).amax() <= 1e-11);
        }
    }

    #[test]
    fn reconstruction_rejects_degree_q_input() {
        let mesh = TimeMesh::new(1.0, 2).unwrap();
        let w = MeshFunction::from_slab_fn(
            mesh,
            SlabBasis::radau_with_left(2).unwrap(),
            Continuity::Discontinuous,
            scalar(0.0),
            |_: usize, _: f64| scalar(1.0),
        )
        .unwrap();
        assert!(reconstruct(&w, &scalar(0.0)).is_err());
        let v = MeshFunction::from_slab_fn(
            mesh,
            SlabBasis::radau(2).unwrap(),
            Continuity::Discontinuous,
            scalar(0.0),
            |_: usize, _: f64| scalar(1.0),
        )
        .unwrap();
        assert!(reconstruct(&v, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn q1_interpolant_takes_right_endpoint() {
        let mesh = TimeMesh::new(1.0, 4).unwrap();
        let u = |t: f64| scalar(t.exp());
        let tilde = ortho_interpolate(&u, &mesh, 1).unwrap();
        for n in 0..4 {
            assert_eq!(tilde.tilde().nodal(n)[(0, 0)], mesh.point(n + 1).exp());
            assert_eq!(tilde.legendre_coeffs(n).ncols(), 0);
        }
    }

    #[test]
    fn interpolant_keeps_low_degree_polynomials() {
        let mesh = TimeMesh::new(1.0, 3).unwrap();
        let u = |t: f64| DVector::from_vec(vec![2.0 - t + t * t, 4.0 * t]);
        let tilde = ortho_interpolate(&u, &mesh, 3).unwrap();
        for n in 0..3 {
            for tau in [0.1, 0.6, 1.0] {
                let diff = (tilde.tilde().eval_slab(n, tau) - u(mesh.time(n, tau))).amax();
                assert!(diff <= 1e-12);
            }
        }
    }

    /// Monomial-basis solve of `p(1) = 1`, `∫₀¹ (p - τ^q) τ^j = 0`, `j < q - 1`.
    fn brute_force_interpolant(q: usize) -> DVector<f64> {
        let mut m = DMatrix::zeros(q, q);
        let mut rhs = DVector::zeros(q);
        for j in 0..q - 1 {
            for i in 0..q {
                m[(j, i)] = 1.0 / (i + j + 1) as f64;
            }
            rhs[j] = 1.0 / (q + j + 1) as f64;
        }
        for i in 0..q {
            m[(q - 1, i)] = 1.0;
        }
        rhs[q - 1] = 1.0;
        m.lu().solve(&rhs).unwrap()
    }

    #[test]
    fn interpolant_of_monomial_matches_linear_system() {
        let mesh = TimeMesh::new(1.0, 1).unwrap();
        for q in 1..=4 {
            let u = move |t: f64| scalar(t.powi(q as i32));
            let tilde = ortho_interpolate(&u, &mesh, q).unwrap();
            let coeffs = brute_force_interpolant(q);
            let mut worst_gap: f64 = 0.0;
            let mut err_fast: f64 = 0.0;
            let mut err_slow: f64 = 0.0;
            for s in 0..=200 {
                let tau = s as f64 / 200.0;
                let p: f64 = coeffs.iter().enumerate().map(|(i, c)| c * tau.powi(i as i32)).sum();
                let fast = tilde.tilde().eval_slab(0, tau)[0];
                worst_gap = worst_gap.max((fast - p).abs());
                err_fast = err_fast.max((tau.powi(q as i32) - fast).abs());
                err_slow = err_slow.max((tau.powi(q as i32) - p).abs());
            }
            assert!(worst_gap <= 1e-11, "q={q}: {worst_gap:e}");
            assert_abs_diff_eq!(err_fast, err_slow, epsilon = 1e-11);
        }
    }

    #[test]
    fn interpolant_conditions() {
        let mesh = TimeMesh::new(1.5, 3).unwrap();
        let u = |t: f64| DVector::from_vec(vec![(3.0 * t).sin(), (0.7 * t).exp()]);
        let gauss = GaussRule::new(20).unwrap();
        for q in 1..=4 {
            let tilde = ortho_interpolate(&u, &mesh, q).unwrap();
            for n in 0..3 {
                let end = tilde.tilde().eval_slab(n, 1.0) - u(mesh.point(n + 1));
                assert!(end.amax() <= 1e-12);
                for j in 0..q.saturating_sub(1) {
                    let moment = (0..gauss.len()).fold(DVector::zeros(2), |acc, g| {
                        let tau = gauss.nodes()[g];
                        let t = mesh.time(n, tau);
                        acc + (u(t) - tilde.tilde().eval_slab(n, tau)) * (gauss.weights()[g] * t.powi(j as i32))
                    });
                    assert!(moment.amax() <= 1e-10, "q={q} n={n} j={j}");
                }
            }
        }
    }

    #[test]
    fn hat_tilde_reproduces_continuous_degree_q() {
        let mesh = TimeMesh::new(1.0, 4).unwrap();
        for q in 1..=3 {
            let u = move |t: f64| scalar((0..=q).map(|i| (i as f64 + 0.5) * t.powi(i as i32)).sum());
            let h = hat_tilde(&u, &mesh, q).unwrap();
            for n in 0..4 {
                for tau in [0.0, 0.3, 0.8, 1.0] {
                    assert_abs_diff_eq!(h.eval_slab(n, tau)[0], u(mesh.time(n, tau))[0], epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn legendre_coefficients_round_trip() {
        let mesh = TimeMesh::new(1.0, 2).unwrap();
        let u = |t: f64| DVector::from_vec(vec![1.0 + t * t, -t]);
        let tilde = ortho_interpolate(&u, &mesh, 3).unwrap();
        let coeffs = legendre_coefficients(tilde.tilde());
        for n in 0..2 {
            let v = tilde.legendre_coeffs(n);
            assert!((coeffs[n].columns(0, 2) - v).amax() <= 1e-13);
        }
    }
}
