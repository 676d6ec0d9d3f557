//! Uniform time meshes, piecewise polynomials in time with vector
//! coefficients, continuous `Lᵖ` and discrete `ℓᵖ` norms, and the backward
//! difference operator.
//!
//! A [`MeshFunction`] stores on every slab `J_n = (t_n, t_{n+1}]` the values
//! at a fixed set of reference nodes: the Radau nodes `c_1..c_q` for degree
//! `q - 1`, or `{0} ∪ {c_1..c_q}` for degree `q`. Evaluation at a grid point
//! `t_n` (n ≥ 1) returns the left limit.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{range_error, DgError, Result};
use crate::polyquad::{GaussRule, LagrangeBasis, RadauTableau};

/// A smooth function of time with values in `R^d`.
pub type VectorFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Uniform partition of `[0, T]` into `N` slabs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeMesh {
    horizon: f64,
    slabs: usize,
}

impl TimeMesh {
    pub fn new(horizon: f64, slabs: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(range_error("horizon T", horizon, "(0, inf)"));
        }
        if slabs == 0 {
            return Err(range_error("slab count N", slabs, ">= 1"));
        }
        Ok(TimeMesh { horizon, slabs })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_slabs(&self) -> usize {
        self.slabs
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.slabs as f64
    }

    /// `t_n = n T / N`, with `t_N = T` exactly.
    pub fn point(&self, n: usize) -> f64 {
        if n == self.slabs {
            self.horizon
        } else {
            n as f64 * self.horizon / self.slabs as f64
        }
    }

    /// `t_n + τ k`.
    pub fn time(&self, slab: usize, tau: f64) -> f64 {
        self.point(slab) + tau * self.step()
    }

    /// Index `n` with `t = t_n`, if `t` is a grid point.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let r = t / self.step();
        let n = r.round();
        if n < 0.0 || n > self.slabs as f64 {
            return None;
        }
        ((r - n).abs() <= 1e-9 * n.max(1.0)).then_some(n as usize)
    }

    /// Slab and reference coordinate of `t ∈ (0, T]`, resolving grid points
    /// to the slab on their left.
    pub fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if !(t > 0.0) || t > self.horizon * (1.0 + 1e-12) {
            return None;
        }
        if let Some(n) = self.index_of(t) {
            if n >= 1 {
                return Some((n - 1, 1.0));
            }
        }
        let r = t / self.step();
        let slab = (r.ceil() as usize).clamp(1, self.slabs) - 1;
        Some((slab, (t - self.point(slab)) / self.step()))
    }
}

/// Reference-node layout of a [`MeshFunction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeLayout {
    /// `c_1..c_q`: polynomials of degree `q - 1`.
    Radau,
    /// `0, c_1..c_q`: polynomials of degree `q`.
    RadauWithLeft,
}

impl NodeLayout {
    fn tag(self) -> &'static str {
        match self {
            NodeLayout::Radau => "radau",
            NodeLayout::RadauWithLeft => "radau_left",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "radau" => Some(NodeLayout::Radau),
            "radau_left" => Some(NodeLayout::RadauWithLeft),
            _ => None,
        }
    }
}

/// The nodal basis shared by all slabs of a mesh function.
#[derive(Clone, Debug)]
pub struct SlabBasis {
    layout: NodeLayout,
    stages: usize,
    lagrange: LagrangeBasis,
}

impl SlabBasis {
    pub fn new(layout: NodeLayout, tableau: &RadauTableau) -> Self {
        let nodes: Vec<f64> = match layout {
            NodeLayout::Radau => tableau.nodes().to_vec(),
            NodeLayout::RadauWithLeft => {
                let mut v = vec![0.0];
                v.extend_from_slice(tableau.nodes());
                v
            }
        };
        SlabBasis {
            layout,
            stages: tableau.stages(),
            lagrange: LagrangeBasis::new(&nodes).expect("radau nodes are distinct"),
        }
    }

    pub fn radau(q: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(NodeLayout::Radau, &RadauTableau::new(q)?)))
    }

    pub fn radau_with_left(q: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(
            NodeLayout::RadauWithLeft,
            &RadauTableau::new(q)?,
        )))
    }

    pub fn layout(&self) -> NodeLayout {
        self.layout
    }

    /// Radau stage count `q` the nodes were taken from.
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn degree(&self) -> usize {
        self.lagrange.degree()
    }

    pub fn len(&self) -> usize {
        self.lagrange.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lagrange.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        self.lagrange.nodes()
    }

    pub fn lagrange(&self) -> &LagrangeBasis {
        &self.lagrange
    }

    fn same_as(&self, other: &SlabBasis) -> bool {
        self.layout == other.layout && self.stages == other.stages
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuity {
    Discontinuous,
    Continuous,
}

/// Anything that can be evaluated slab-wise in reference coordinates.
pub trait SlabFunction {
    fn eval_slab(&self, slab: usize, tau: f64) -> DVector<f64>;
}

impl<F> SlabFunction for F
where
    F: Fn(usize, f64) -> DVector<f64>,
{
    fn eval_slab(&self, slab: usize, tau: f64) -> DVector<f64> {
        self(slab, tau)
    }
}

/// Piecewise polynomial in time with values in `R^d`.
#[derive(Clone, Debug)]
pub struct MeshFunction {
    mesh: TimeMesh,
    basis: Arc<SlabBasis>,
    /// Per slab, a `d × nodes` matrix whose columns are the nodal values.
    coeffs: Vec<DMatrix<f64>>,
    continuity: Continuity,
    left_value_at_zero: DVector<f64>,
}

/// Relative tolerance of the continuity check in [`MeshFunction::new`].
pub const CONTINUITY_TOLERANCE: f64 = 1e-12;

impl MeshFunction {
    pub fn new(
        mesh: TimeMesh,
        basis: Arc<SlabBasis>,
        coeffs: Vec<DMatrix<f64>>,
        continuity: Continuity,
        left_value_at_zero: DVector<f64>,
    ) -> Result<Self> {
        if coeffs.len() != mesh.num_slabs() {
            return Err(DgError::Validation(format!(
                "{} coefficient blocks for {} slabs",
                coeffs.len(),
                mesh.num_slabs()
            )));
        }
        let d = left_value_at_zero.len();
        if let Some(n) = coeffs
            .iter()
            .position(|c| c.nrows() != d || c.ncols() != basis.len())
        {
            return Err(DgError::Validation(format!(
                "slab {n}: expected {d}x{} coefficients",
                basis.len()
            )));
        }
        let f = MeshFunction {
            mesh,
            basis,
            coeffs,
            continuity,
            left_value_at_zero,
        };
        if continuity == Continuity::Continuous {
            f.check_continuity()?;
        }
        Ok(f)
    }

    /// Samples `f(slab, τ)` at the reference nodes of every slab.
    pub fn from_slab_fn(
        mesh: TimeMesh,
        basis: Arc<SlabBasis>,
        continuity: Continuity,
        left_value_at_zero: DVector<f64>,
        f: impl SlabFunction,
    ) -> Result<Self> {
        let d = left_value_at_zero.len();
        let coeffs = (0..mesh.num_slabs())
            .map(|n| {
                let mut block = DMatrix::zeros(d, basis.len());
                for (j, &tau) in basis.nodes().iter().enumerate() {
                    block.set_column(j, &f.eval_slab(n, tau));
                }
                block
            })
            .collect();
        Self::new(mesh, basis, coeffs, continuity, left_value_at_zero)
    }

    fn scale(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.amax())
            .fold(self.left_value_at_zero.amax(), f64::max)
    }

    fn check_continuity(&self) -> Result<()> {
        let tol = CONTINUITY_TOLERANCE * self.scale().max(f64::MIN_POSITIVE);
        for n in 0..self.mesh.num_slabs() {
            let left = self.left_limit(n);
            let right = self.eval_slab(n, 0.0);
            let gap = (&left - &right).amax();
            if gap > tol {
                return Err(DgError::Validation(format!(
                    "declared continuous function jumps by {gap:e} at t_{n}"
                )));
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn basis(&self) -> &Arc<SlabBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.left_value_at_zero.len()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn left_value_at_zero(&self) -> &DVector<f64> {
        &self.left_value_at_zero
    }

    /// Nodal values on slab `n`, one column per reference node.
    pub fn nodal(&self, n: usize) -> &DMatrix<f64> {
        &self.coeffs[n]
    }

    pub fn nodal_blocks(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Value on slab `n` at reference coordinate `τ ∈ [0, 1]`.
    pub fn eval_slab(&self, n: usize, tau: f64) -> DVector<f64> {
        let weights = DVector::from_vec(self.basis.lagrange().eval_all(tau));
        &self.coeffs[n] * weights
    }

    /// Time derivative on slab `n` at reference coordinate `τ`.
    pub fn deriv_slab(&self, n: usize, tau: f64) -> DVector<f64> {
        let weights = DVector::from_vec(self.basis.lagrange().deriv_all(tau));
        (&self.coeffs[n] * weights) / self.mesh.step()
    }

    /// `v_n = v(t_n)`: left limit for `n ≥ 1`, the attached initial value for `n = 0`.
    pub fn left_limit(&self, n: usize) -> DVector<f64> {
        if n == 0 {
            self.left_value_at_zero.clone()
        } else {
            self.eval_slab(n - 1, 1.0)
        }
    }

    /// `v_n^+`.
    pub fn right_limit(&self, n: usize) -> DVector<f64> {
        self.eval_slab(n, 0.0)
    }

    /// Value at global time `t ∈ [0, T]`.
    pub fn value_at(&self, t: f64) -> Option<DVector<f64>> {
        if t == 0.0 {
            return Some(self.left_value_at_zero.clone());
        }
        self.mesh.locate(t).map(|(n, tau)| self.eval_slab(n, tau))
    }

    /// Applies a linear map to every nodal value (and to the value at zero).
    ///
    /// For linear `map` this is exact: the result is `t ↦ map(v(t))`.
    pub fn map_linear(&self, map: impl Fn(&DVector<f64>) -> DVector<f64>) -> MeshFunction {
        let coeffs: Vec<DMatrix<f64>> = self
            .coeffs
            .iter()
            .map(|block| {
                let cols: Vec<DVector<f64>> =
                    block.column_iter().map(|c| map(&c.into_owned())).collect();
                DMatrix::from_columns(&cols)
            })
            .collect();
        MeshFunction {
            mesh: self.mesh,
            basis: self.basis.clone(),
            coeffs,
            continuity: self.continuity,
            left_value_at_zero: map(&self.left_value_at_zero),
        }
    }

    /// `a·self + b·other`; both must share mesh and basis.
    pub fn combine(&self, a: f64, other: &MeshFunction, b: f64) -> Result<MeshFunction> {
        if self.mesh != other.mesh || !self.basis.same_as(&other.basis) {
            return Err(DgError::Validation(
                "mesh functions live on different meshes or bases".into(),
            ));
        }
        let continuity = if self.continuity == other.continuity {
            self.continuity
        } else {
            Continuity::Discontinuous
        };
        Ok(MeshFunction {
            mesh: self.mesh,
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x * a + y * b)
                .collect(),
            continuity,
            left_value_at_zero: &self.left_value_at_zero * a + &other.left_value_at_zero * b,
        })
    }

    /// Writes the documented CSV layout (see [`MeshFunction::read_csv`]).
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut out = out;
        let mut meta = String::new();
        writeln!(meta, "# mesh_function v1").unwrap();
        writeln!(
            meta,
            "# horizon={},slabs={},layout={},q={},continuity={},dim={}",
            self.mesh.horizon(),
            self.mesh.num_slabs(),
            self.basis.layout().tag(),
            self.basis.stages(),
            match self.continuity {
                Continuity::Continuous => "continuous",
                Continuity::Discontinuous => "discontinuous",
            },
            self.dim()
        )
        .unwrap();
        out.write_all(meta.as_bytes())?;

        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["slab".to_string(), "node".into(), "tau".into()];
        header.extend((0..self.dim()).map(|r| format!("x{r}")));
        writer.write_record(&header)?;

        let mut row = |slab: String, node: usize, tau: f64, v: &[f64]| -> Result<()> {
            let mut rec = vec![slab, node.to_string(), tau.to_string()];
            rec.extend(v.iter().map(|x| x.to_string()));
            writer.write_record(&rec)?;
            Ok(())
        };
        row("-1".into(), 0, 0.0, self.left_value_at_zero.as_slice())?;
        for (n, block) in self.coeffs.iter().enumerate() {
            for (j, &tau) in self.basis.nodes().iter().enumerate() {
                let col: Vec<f64> = block.column(j).iter().copied().collect();
                row(n.to_string(), j, tau, &col)?;
            }
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads the CSV layout written by [`MeshFunction::write_csv`]:
    ///
    /// ```text
    /// # mesh_function v1
    /// # horizon=T,slabs=N,layout=radau|radau_left,q=Q,continuity=continuous|discontinuous,dim=D
    /// slab,node,tau,x0,...,x{D-1}
    /// -1,0,0,<value at t = 0>
    /// <slab>,<node>,<reference node>,<nodal value>    (one row per slab per node)
    /// ```
    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text)?;
        let meta_line = text
            .lines()
            .find(|l| l.starts_with("# horizon="))
            .ok_or(DgError::Parse {
                line: 2,
                message: "missing metadata line".into(),
            })?;
        let field = |key: &str| -> Result<&str> {
            meta_line[2..]
                .split(',')
                .filter_map(|kv| kv.split_once('='))
                .find(|(k, _)| *k == key)
                .map(|(_, v)| v)
                .ok_or(DgError::Parse {
                    line: 2,
                    message: format!("metadata lacks {key}"),
                })
        };
        let bad = |key: &str| DgError::Parse {
            line: 2,
            message: format!("bad metadata value for {key}"),
        };
        let horizon: f64 = field("horizon")?.parse().map_err(|_| bad("horizon"))?;
        let slabs: usize = field("slabs")?.parse().map_err(|_| bad("slabs"))?;
        let layout = NodeLayout::from_tag(field("layout")?).ok_or_else(|| bad("layout"))?;
        let q: usize = field("q")?.parse().map_err(|_| bad("q"))?;
        let continuity = match field("continuity")? {
            "continuous" => Continuity::Continuous,
            "discontinuous" => Continuity::Discontinuous,
            _ => return Err(bad("continuity")),
        };
        let dim: usize = field("dim")?.parse().map_err(|_| bad("dim"))?;
        let mesh = TimeMesh::new(horizon, slabs)?;
        let basis = Arc::new(SlabBasis::new(layout, &RadauTableau::new(q)?));

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut left = None;
        let mut coeffs = vec![DMatrix::<f64>::zeros(dim, basis.len()); slabs];
        let mut seen = vec![vec![false; basis.len()]; slabs];
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 4;
            let parse_err = |m: &str| DgError::Parse {
                line,
                message: m.to_string(),
            };
            if rec.len() != 3 + dim {
                return Err(parse_err("wrong column count"));
            }
            let values: Vec<f64> = rec
                .iter()
                .skip(3)
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err("non-numeric value"))?;
            let slab: i64 = rec[0].parse().map_err(|_| parse_err("bad slab index"))?;
            if slab == -1 {
                left = Some(DVector::from_vec(values));
                continue;
            }
            let node: usize = rec[1].parse().map_err(|_| parse_err("bad node index"))?;
            let slab = usize::try_from(slab).map_err(|_| parse_err("bad slab index"))?;
            if slab >= slabs || node >= basis.len() {
                return Err(parse_err("slab or node index out of range"));
            }
            coeffs[slab].set_column(node, &DVector::from_vec(values));
            seen[slab][node] = true;
        }
        if seen.iter().flatten().any(|s| !s) {
            return Err(DgError::Parse {
                line: 0,
                message: "missing nodal rows".into(),
            });
        }
        let left = left.ok_or(DgError::Parse {
            line: 0,
            message: "missing value at t = 0".into(),
        })?;
        Self::new(mesh, basis, coeffs, continuity, left)
    }
}

/// State-space norm `‖·‖_X` on `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub enum XNorm {
    Euclidean,
    /// `(Σ w_r x_r²)^{1/2}` with positive weights.
    WeightedDiagonal(Vec<f64>),
}

impl XNorm {
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        match self {
            XNorm::Euclidean => x.norm(),
            XNorm::WeightedDiagonal(w) => x
                .iter()
                .zip(w)
                .map(|(v, w)| w * v * v)
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Exponent and state-space norm for `Lᵖ(X)` quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct NormSpec {
    p: f64,
    x_norm: XNorm,
}

impl NormSpec {
    /// Accepts `p ∈ [1, ∞]` (use `f64::INFINITY` for the max norm).
    pub fn new(p: f64, x_norm: XNorm) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(range_error("norm exponent p", p, "[1, inf]"));
        }
        if let XNorm::WeightedDiagonal(w) = &x_norm {
            if w.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
                return Err(DgError::Validation("norm weights must be positive".into()));
            }
        }
        Ok(NormSpec { p, x_norm })
    }

    pub fn euclidean(p: f64) -> Result<Self> {
        Self::new(p, XNorm::Euclidean)
    }

    /// Requires `p ∈ (1, ∞)`, the range of the maximal-regularity statements.
    pub fn for_max_regularity(p: f64, x_norm: XNorm) -> Result<Self> {
        let spec = Self::new(p, x_norm)?;
        spec.check_max_regularity()?;
        Ok(spec)
    }

    pub fn check_max_regularity(&self) -> Result<()> {
        if self.p > 1.0 && self.p.is_finite() {
            Ok(())
        } else {
            Err(range_error("norm exponent p", self.p, "(1, inf)"))
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Dual exponent `p'`.
    pub fn dual(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else if self.p.is_infinite() {
            1.0
        } else {
            self.p / (self.p - 1.0)
        }
    }

    pub fn x_norm(&self) -> &XNorm {
        &self.x_norm
    }
}

/// Composite Gauss quadrature used for continuous norms: `panels` equal
/// sub-intervals per slab with `points` Gauss points each.
#[derive(Clone, Debug)]
pub struct NormQuadrature {
    panels: usize,
    rule: GaussRule,
}

impl Default for NormQuadrature {
    fn default() -> Self {
        Self::new(16, 10).expect("default rule is valid")
    }
}

impl NormQuadrature {
    pub fn new(panels: usize, points: usize) -> Result<Self> {
        if panels == 0 {
            return Err(range_error("quadrature panels", panels, ">= 1"));
        }
        Ok(NormQuadrature {
            panels,
            rule: GaussRule::new(points)?,
        })
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn points(&self) -> usize {
        self.rule.len()
    }

    /// Same rule with twice the panels.
    pub fn doubled(&self) -> Self {
        NormQuadrature {
            panels: 2 * self.panels,
            rule: self.rule.clone(),
        }
    }

    /// Reference nodes and weights on `[0, 1]`.
    pub fn samples(&self) -> (Vec<f64>, Vec<f64>) {
        let h = 1.0 / self.panels as f64;
        let mut nodes = Vec::with_capacity(self.panels * self.rule.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for r in 0..self.panels {
            for (&s, &w) in self.rule.nodes().iter().zip(self.rule.weights()) {
                nodes.push((r as f64 + s) * h);
                weights.push(w * h);
            }
        }
        (nodes, weights)
    }
}

/// `‖v(t)‖_X` sampled at the composite quadrature points of each slab, from
/// which `Lᵖ` norms over any prefix `(0, t_m]` and any `p` follow.
#[derive(Clone, Debug)]
pub struct SampledNorms {
    step: f64,
    weights: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl SampledNorms {
    /// Samples the first `slabs` slabs of `mesh`.
    pub fn sample<F: SlabFunction + ?Sized>(
        mesh: &TimeMesh,
        slabs: usize,
        quad: &NormQuadrature,
        x_norm: &XNorm,
        f: &F,
    ) -> Self {
        let (nodes, weights) = quad.samples();
        let values = (0..slabs.min(mesh.num_slabs()))
            .map(|n| {
                nodes
                    .iter()
                    .map(|&tau| x_norm.norm(&f.eval_slab(n, tau)))
                    .collect()
            })
            .collect();
        SampledNorms {
            step: mesh.step(),
            weights,
            values,
        }
    }

    pub fn num_slabs(&self) -> usize {
        self.values.len()
    }

    /// `∫_{J_n} ‖v‖^p` (for `p = ∞`, the sampled maximum on `J_n`).
    pub fn slab_power(&self, n: usize, p: f64) -> f64 {
        let vals = &self.values[n];
        if p.is_infinite() {
            vals.iter().copied().fold(0.0, f64::max)
        } else {
            self.step
                * vals
                    .iter()
                    .zip(&self.weights)
                    .map(|(v, w)| w * v.powf(p))
                    .sum::<f64>()
        }
    }

    /// `‖v‖_{Lᵖ(0, t_m)}`.
    pub fn prefix_norm(&self, m: usize, p: f64) -> f64 {
        let m = m.min(self.num_slabs());
        if p.is_infinite() {
            (0..m).map(|n| self.slab_power(n, p)).fold(0.0, f64::max)
        } else {
            (0..m).map(|n| self.slab_power(n, p)).sum::<f64>().powf(1.0 / p)
        }
    }

    /// Prefix norms for `m = 1..=N` (entry `m - 1` is the norm over `(0, t_m]`).
    pub fn prefix_norms(&self, p: f64) -> Vec<f64> {
        let mut acc = 0.0;
        (0..self.num_slabs())
            .map(|n| {
                let s = self.slab_power(n, p);
                if p.is_infinite() {
                    acc = f64::max(acc, s);
                    acc
                } else {
                    acc += s;
                    acc.powf(1.0 / p)
                }
            })
            .collect()
    }

    /// Per-slab `Lᵖ(J_n)` norms.
    pub fn slab_norms(&self, p: f64) -> Vec<f64> {
        (0..self.num_slabs())
            .map(|n| {
                let s = self.slab_power(n, p);
                if p.is_infinite() {
                    s
                } else {
                    s.powf(1.0 / p)
                }
            })
            .collect()
    }
}

/// `‖v‖_{Lᵖ((0, t_m); X)}` by composite Gauss quadrature.
pub fn lp_norm<F: SlabFunction + ?Sized>(
    v: &F,
    mesh: &TimeMesh,
    spec: &NormSpec,
    prefix: usize,
    quad: &NormQuadrature,
) -> Result<f64> {
    check_prefix(mesh, prefix)?;
    let samples = SampledNorms::sample(mesh, prefix, quad, spec.x_norm(), v);
    Ok(samples.prefix_norm(prefix, spec.p()))
}

/// Relative difference between [`lp_norm`] with `quad` and with twice the
/// panels; a posteriori check of the quadrature error.
pub fn lp_norm_doubling_gap<F: SlabFunction + ?Sized>(
    v: &F,
    mesh: &TimeMesh,
    spec: &NormSpec,
    prefix: usize,
    quad: &NormQuadrature,
) -> Result<f64> {
    let coarse = lp_norm(v, mesh, spec, prefix, quad)?;
    let fine = lp_norm(v, mesh, spec, prefix, &quad.doubled())?;
    Ok(if fine == 0.0 {
        coarse.abs()
    } else {
        (coarse - fine).abs() / fine
    })
}

impl SlabFunction for MeshFunction {
    fn eval_slab(&self, slab: usize, tau: f64) -> DVector<f64> {
        MeshFunction::eval_slab(self, slab, tau)
    }
}

fn check_prefix(mesh: &TimeMesh, prefix: usize) -> Result<()> {
    if prefix == 0 || prefix > mesh.num_slabs() {
        return Err(range_error("prefix index m", prefix, "1..=N"));
    }
    Ok(())
}

/// Discrete norm `(Σ_{ℓ<m} k Σ_i ‖v(t_{ℓi})‖^p)^{1/p}` over the Radau stage
/// times of `stages`. Defined for functions vanishing at `t = 0`.
pub fn discrete_lp_norm(
    v: &MeshFunction,
    stages: &RadauTableau,
    spec: &NormSpec,
    prefix: usize,
) -> Result<f64> {
    check_prefix(v.mesh(), prefix)?;
    let zero_tol = 1e-12 * v.scale().max(f64::MIN_POSITIVE);
    if v.left_value_at_zero().amax() > zero_tol {
        return Err(DgError::Precondition(
            "discrete norm is defined for functions with v(0) = 0".into(),
        ));
    }
    let k = v.mesh().step();
    let p = spec.p();
    let mut acc: f64 = 0.0;
    for n in 0..prefix {
        for &c in stages.nodes() {
            let x = spec.x_norm().norm(&v.eval_slab(n, c));
            if p.is_infinite() {
                acc = acc.max(x);
            } else {
                acc += k * x.powf(p);
            }
        }
    }
    Ok(if p.is_infinite() { acc } else { acc.powf(1.0 / p) })
}

/// `∂ₖv(t) = (v(t) - v(t - k)) / k` with `v = 0` on `[-k, 0)`.
pub fn backward_difference(v: &MeshFunction) -> MeshFunction {
    let k = v.mesh().step();
    let coeffs = v
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, block)| {
            if n == 0 {
                block / k
            } else {
                (block - &v.coeffs[n - 1]) / k
            }
        })
        .collect();
    MeshFunction {
        mesh: v.mesh,
        basis: v.basis.clone(),
        coeffs,
        continuity: v.continuity,
        left_value_at_zero: &v.left_value_at_zero / k,
    }
}
