//! Piecewise-linear finite elements on an interval: the discrete evolution
//! triple `V_h ⊂ H ⊂ V_h*` with `V = W^{1,p}` and `H = L²`, plus the map
//! `ι` into the space `U` on which the multivalued term acts.
//!
//! The V-norm convention depends on the boundary condition:
//! `‖u‖ = ‖u'‖_{L^p}` with homogeneous Dirichlet conditions and
//! `‖u‖ = (‖u'‖^p_{L^p} + ‖u‖^p_{L^p})^{1/p}` with natural ones. The
//! `|u|^p` term uses two-point Gauss quadrature per element, which is exact
//! for `p = 2`.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Tridiagonal, TridiagonalCholesky};
use crate::quadrature::{mapped, GAUSS2, GAUSS5};

/// Iteration cap of the dual-norm ascent for `p != 2`.
pub const DUAL_NORM_MAX_ITER: usize = 500;
/// Relative stopping tolerance of the dual-norm ascent for `p != 2`.
pub const DUAL_NORM_RTOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Homogeneous Dirichlet conditions at both ends; endpoints are not unknowns.
    Dirichlet,
    /// No constraint; every node is an unknown.
    Natural,
}

/// Nodes `0 = x_0 < ... < x_M = L` on an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialMesh {
    nodes: Vec<f64>,
    bc: BoundaryCondition,
}

impl SpatialMesh {
    pub fn uniform(length: f64, elements: usize, bc: BoundaryCondition) -> Result<Self> {
        if !(length > 0.0) || elements == 0 {
            return Err(Error::InvalidArgument(format!(
                "mesh needs a positive length and at least one element (L = {length}, M = {elements})"
            )));
        }
        let h = length / elements as f64;
        let mut nodes: Vec<f64> = (0..=elements).map(|i| i as f64 * h).collect();
        nodes[elements] = length;
        Self::from_nodes(nodes, bc)
    }

    pub fn from_nodes(nodes: Vec<f64>, bc: BoundaryCondition) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::InvalidArgument("mesh must start at 0 and have at least two nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("mesh nodes must be strictly increasing".into()));
        }
        if bc == BoundaryCondition::Dirichlet && nodes.len() < 3 {
            return Err(Error::InvalidArgument("a Dirichlet mesh needs an interior node".into()));
        }
        Ok(Self { nodes, bc })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn element_length(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn free_count(&self) -> usize {
        match self.bc {
            BoundaryCondition::Dirichlet => self.nodes.len() - 2,
            BoundaryCondition::Natural => self.nodes.len(),
        }
    }

    /// Unknown index of mesh node `node`, if it is free.
    pub fn free_index(&self, node: usize) -> Option<usize> {
        match self.bc {
            BoundaryCondition::Natural => Some(node),
            BoundaryCondition::Dirichlet => {
                if node == 0 || node + 1 == self.nodes.len() {
                    None
                } else {
                    Some(node - 1)
                }
            }
        }
    }

    /// Unknown indices of the two endpoints of element `e`.
    fn element_dofs(&self, e: usize) -> [Option<usize>; 2] {
        [self.free_index(e), self.free_index(e + 1)]
    }
}

/// The space `V_h` of continuous piecewise-linear functions with exponent
/// `p` and its cached Gram matrices. Shared behind an `Arc`.
#[derive(Debug)]
pub struct FemSpace {
    mesh: SpatialMesh,
    p: f64,
    mass: Tridiagonal,
    stiffness: Tridiagonal,
    gram: Tridiagonal,
    gram_factor: TridiagonalCholesky,
}

impl FemSpace {
    pub fn new(mesh: SpatialMesh, p: f64) -> Result<Arc<Self>> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidArgument(format!("exponent p must lie in (1, inf), got {p}")));
        }
        let n = mesh.free_count();
        let mut mass = Tridiagonal::zeros(n);
        let mut stiffness = Tridiagonal::zeros(n);
        for e in 0..mesh.element_count() {
            let h = mesh.element_length(e);
            let dofs = mesh.element_dofs(e);
            let local_m = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
            let local_k = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                        mass.add(i, j, local_m[a][b]);
                        stiffness.add(i, j, local_k[a][b]);
                    }
                }
            }
        }
        let mut gram = stiffness.clone();
        if mesh.bc() == BoundaryCondition::Natural {
            gram.add_scaled(1.0, &mass);
        }
        let gram_factor = TridiagonalCholesky::new(&gram)?;
        // positive definiteness of the mass matrix is part of the contract
        TridiagonalCholesky::new(&mass)?;
        Ok(Arc::new(Self {
            mesh,
            p,
            mass,
            stiffness,
            gram,
            gram_factor,
        }))
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `q` with `1/p + 1/q = 1`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn dim(&self) -> usize {
        self.mesh.free_count()
    }

    pub fn mass(&self) -> &Tridiagonal {
        &self.mass
    }

    pub fn stiffness(&self) -> &Tridiagonal {
        &self.stiffness
    }

    /// Gram matrix of the `p = 2` V-inner product.
    pub fn gram(&self) -> &Tridiagonal {
        &self.gram
    }
}

/// Extension methods that need the `Arc` handle itself.
pub trait SpaceExt {
    fn zero(&self) -> DiscreteFunction;
    fn function(&self, coeffs: DVector<f64>) -> Result<DiscreteFunction>;
    fn dual(&self, values: DVector<f64>) -> Result<DualVector>;
    fn zero_dual(&self) -> DualVector;
    fn interpolate<F: Fn(f64) -> f64>(&self, f: F) -> DiscreteFunction;
    fn l2_project<F: Fn(f64) -> f64>(&self, f: F) -> DiscreteFunction;
    fn load<F: Fn(f64) -> f64>(&self, f: F) -> DualVector;
    fn riesz(&self, w: &DiscreteFunction) -> Result<DualVector>;
    fn mass_apply(&self, u: &DiscreteFunction) -> Result<DualVector>;
}

impl SpaceExt for Arc<FemSpace> {
    fn zero(&self) -> DiscreteFunction {
        DiscreteFunction {
            space: Arc::clone(self),
            coeffs: DVector::zeros(self.dim()),
        }
    }

    fn function(&self, coeffs: DVector<f64>) -> Result<DiscreteFunction> {
        if coeffs.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                self.dim(),
                coeffs.len()
            )));
        }
        Ok(DiscreteFunction {
            space: Arc::clone(self),
            coeffs,
        })
    }

    fn dual(&self, values: DVector<f64>) -> Result<DualVector> {
        if values.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} functional values, got {}",
                self.dim(),
                values.len()
            )));
        }
        Ok(DualVector {
            space: Arc::clone(self),
            values,
        })
    }

    fn zero_dual(&self) -> DualVector {
        DualVector {
            space: Arc::clone(self),
            values: DVector::zeros(self.dim()),
        }
    }

    /// Nodal interpolant; Dirichlet endpoint values of `f` are dropped.
    fn interpolate<F: Fn(f64) -> f64>(&self, f: F) -> DiscreteFunction {
        let mesh = &self.mesh;
        let mut c = DVector::zeros(self.dim());
        for (node, &x) in mesh.nodes().iter().enumerate() {
            if let Some(i) = mesh.free_index(node) {
                c[i] = f(x);
            }
        }
        DiscreteFunction {
            space: Arc::clone(self),
            coeffs: c,
        }
    }

    /// Galerkin L² projection onto `V_h`.
    fn l2_project<F: Fn(f64) -> f64>(&self, f: F) -> DiscreteFunction {
        let b = self.load(f);
        let coeffs = TridiagonalCholesky::new(&self.mass)
            .expect("mass matrix is positive definite")
            .solve(&b.values);
        DiscreteFunction {
            space: Arc::clone(self),
            coeffs,
        }
    }

    /// `⟨f, φ_i⟩ = ∫ f φ_i dx` by five-point Gauss quadrature per element.
    fn load<F: Fn(f64) -> f64>(&self, f: F) -> DualVector {
        let mesh = &self.mesh;
        let mut v = DVector::zeros(self.dim());
        for e in 0..mesh.element_count() {
            let (a, b) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
            let h = b - a;
            let dofs = mesh.element_dofs(e);
            for (x, w) in mapped(&GAUSS5, a, b) {
                let fx = f(x) * w;
                let right = (x - a) / h;
                if let Some(i) = dofs[0] {
                    v[i] += fx * (1.0 - right);
                }
                if let Some(j) = dofs[1] {
                    v[j] += fx * right;
                }
            }
        }
        DualVector {
            space: Arc::clone(self),
            values: v,
        }
    }

    /// `Gram · w`: the functional whose `p = 2` Riesz representative is `w`.
    fn riesz(&self, w: &DiscreteFunction) -> Result<DualVector> {
        w.check_space(self)?;
        Ok(DualVector {
            space: Arc::clone(self),
            values: self.gram.mul_vec(&w.coeffs),
        })
    }

    /// `i* i u`, the functional `v ↦ (u, v)_H`.
    fn mass_apply(&self, u: &DiscreteFunction) -> Result<DualVector> {
        u.check_space(self)?;
        Ok(DualVector {
            space: Arc::clone(self),
            values: self.mass.mul_vec(&u.coeffs),
        })
    }
}

/// A member of `V_h`, stored by its values at the free nodes.
#[derive(Clone, Debug)]
pub struct DiscreteFunction {
    space: Arc<FemSpace>,
    pub coeffs: DVector<f64>,
}

impl PartialEq for DiscreteFunction {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.space, &other.space) && self.coeffs == other.coeffs
    }
}

impl DiscreteFunction {
    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    fn check_space(&self, space: &Arc<FemSpace>) -> Result<()> {
        if Arc::ptr_eq(&self.space, space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn same_space(&self, other: &DiscreteFunction) -> Result<()> {
        self.check_space(&other.space)
    }

    /// Values at every mesh node, including Dirichlet endpoints.
    pub fn nodal_values(&self) -> Vec<f64> {
        let mesh = self.space.mesh();
        (0..mesh.nodes().len())
            .map(|n| mesh.free_index(n).map_or(0.0, |i| self.coeffs[i]))
            .collect()
    }

    /// Elementwise constant derivative.
    pub fn gradients(&self) -> Vec<f64> {
        let mesh = self.space.mesh();
        let vals = self.nodal_values();
        (0..mesh.element_count())
            .map(|e| (vals[e + 1] - vals[e]) / mesh.element_length(e))
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let nodes = self.space.mesh().nodes();
        let vals = self.nodal_values();
        let e = nodes.partition_point(|&n| n < x).clamp(1, nodes.len() - 1) - 1;
        let s = (x - nodes[e]) / (nodes[e + 1] - nodes[e]);
        vals[e] * (1.0 - s) + vals[e + 1] * s
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            coeffs: &self.coeffs * s,
        }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self {
            space: Arc::clone(&self.space),
            coeffs: &self.coeffs * a + &other.coeffs * b,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn h_inner(&self, other: &Self) -> Result<f64> {
        self.same_space(other)?;
        Ok(self.coeffs.dot(&self.space.mass.mul_vec(&other.coeffs)))
    }

    pub fn h_norm(&self) -> f64 {
        self.coeffs.dot(&self.space.mass.mul_vec(&self.coeffs)).max(0.0).sqrt()
    }

    /// `‖u‖^p` in the V-norm convention of the space.
    pub fn v_norm_pow(&self) -> f64 {
        let space = &self.space;
        let p = space.p;
        let mesh = space.mesh();
        let grads = self.gradients();
        let mut acc: f64 = grads
            .iter()
            .enumerate()
            .map(|(e, g)| mesh.element_length(e) * g.abs().powf(p))
            .sum();
        if mesh.bc() == BoundaryCondition::Natural {
            let vals = self.nodal_values();
            for e in 0..mesh.element_count() {
                let (a, b) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
                for (x, w) in mapped(&GAUSS2, a, b) {
                    let s = (x - a) / (b - a);
                    let u = vals[e] * (1.0 - s) + vals[e + 1] * s;
                    acc += w * u.abs().powf(p);
                }
            }
        }
        acc
    }

    pub fn v_norm(&self) -> f64 {
        self.v_norm_pow().powf(1.0 / self.space.p)
    }

    /// `‖u − f‖_{L²}` for a pointwise target, five-point Gauss per element.
    pub fn l2_error<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mesh = self.space.mesh();
        let vals = self.nodal_values();
        let mut acc = 0.0;
        for e in 0..mesh.element_count() {
            let (a, b) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
            for (x, w) in mapped(&GAUSS5, a, b) {
                let s = (x - a) / (b - a);
                let d = vals[e] * (1.0 - s) + vals[e + 1] * s - f(x);
                acc += w * d * d;
            }
        }
        acc.sqrt()
    }
}

/// A member of `V_h*`, stored by its values `⟨g, φ_i⟩` on the free basis.
#[derive(Clone, Debug)]
pub struct DualVector {
    space: Arc<FemSpace>,
    pub values: DVector<f64>,
}

impl DualVector {
    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn pair(&self, v: &DiscreteFunction) -> Result<f64> {
        if !Arc::ptr_eq(&self.space, v.space()) {
            return Err(Error::SpaceMismatch);
        }
        Ok(self.values.dot(&v.coeffs))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            values: &self.values * s,
        }
    }

    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if !Arc::ptr_eq(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self {
            space: Arc::clone(&self.space),
            values: &self.values * a + &other.values * b,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    /// `sup { ⟨g, v⟩ : ‖v‖ ≤ 1 }` over `V_h` in the space's V-norm.
    ///
    /// `sqrt(gᵀ G⁻¹ g)` with the `p = 2` Gram matrix, whatever `p` is. Equal
    /// to [`DualVector::dual_norm`] for `p = 2`; a cheap equivalent norm
    /// otherwise.
    pub fn riesz_norm(&self) -> f64 {
        let y = self.space.gram_factor.solve(&self.values);
        self.values.dot(&y).max(0.0).sqrt()
    }

    /// For `p = 2` this is `sqrt(gᵀ G⁻¹ g)` with the V-Gram matrix `G`. For
    /// other exponents the maximizer is the minimizer of the convex
    /// functional `‖v‖^p / p − ⟨g, v⟩`, found by damped Newton ascent; the
    /// dual norm is then `⟨g, v⟩ / ‖v‖`.
    pub fn dual_norm(&self) -> Result<f64> {
        let space = &self.space;
        if space.p == 2.0 {
            let y = space.gram_factor.solve(&self.values);
            return Ok(self.values.dot(&y).max(0.0).sqrt());
        }
        let scale = self.values.amax();
        if scale == 0.0 {
            return Ok(0.0);
        }
        let g = &self.values / scale;
        Ok(scale * dual_norm_ascent(space, &g)?)
    }
}

/// `E(v) = ‖v‖^p` together with the gradient and a regularized Hessian of `E / p`.
fn energy_terms(space: &Arc<FemSpace>, coeffs: &DVector<f64>) -> (f64, DVector<f64>, Tridiagonal) {
    let p = space.p;
    let mesh = space.mesh();
    let n = space.dim();
    let u = DiscreteFunction {
        space: Arc::clone(space),
        coeffs: coeffs.clone(),
    };
    let vals = u.nodal_values();
    let grads = u.gradients();
    let gmax = grads.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
    let floor = 1e-8 * gmax.max(f64::MIN_POSITIVE);
    let mut energy = 0.0;
    let mut grad = DVector::zeros(n);
    let mut hess = Tridiagonal::zeros(n);
    for e in 0..mesh.element_count() {
        let h = mesh.element_length(e);
        let g = grads[e];
        let dofs = mesh.element_dofs(e);
        energy += h * g.abs().powf(p);
        let flux = g.abs().powf(p - 2.0) * g;
        let curv = (p - 1.0) * g.abs().max(floor).powf(p - 2.0) / h;
        let sign = [-1.0, 1.0];
        for a in 0..2 {
            if let Some(i) = dofs[a] {
                grad[i] += flux * sign[a];
                for b in 0..2 {
                    if let Some(j) = dofs[b] {
                        hess.add(i, j, curv * sign[a] * sign[b]);
                    }
                }
            }
        }
    }
    if mesh.bc() == BoundaryCondition::Natural {
        let vmax = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let vfloor = 1e-8 * vmax.max(f64::MIN_POSITIVE);
        for e in 0..mesh.element_count() {
            let (a, b) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
            let dofs = mesh.element_dofs(e);
            for (x, w) in mapped(&GAUSS2, a, b) {
                let s = (x - a) / (b - a);
                let phi = [1.0 - s, s];
                let uq = vals[e] * phi[0] + vals[e + 1] * phi[1];
                energy += w * uq.abs().powf(p);
                let flux = w * uq.abs().powf(p - 2.0) * uq;
                let curv = w * (p - 1.0) * uq.abs().max(vfloor).powf(p - 2.0);
                for a in 0..2 {
                    if let Some(i) = dofs[a] {
                        grad[i] += flux * phi[a];
                        for b in 0..2 {
                            if let Some(j) = dofs[b] {
                                hess.add(i, j, curv * phi[a] * phi[b]);
                            }
                        }
                    }
                }
            }
        }
    }
    (energy, grad, hess)
}

fn dual_norm_ascent(space: &Arc<FemSpace>, g: &DVector<f64>) -> Result<f64> {
    let p = space.p;
    let energy = |v: &DVector<f64>| energy_terms(space, v).0;
    let mut v = space.gram_factor.solve(g);
    let e0 = energy(&v);
    let gv = g.dot(&v);
    if e0 <= 0.0 || gv <= 0.0 {
        return Ok(0.0);
    }
    // best multiple of the p = 2 Riesz representative
    v *= (gv / e0).powf(1.0 / (p - 1.0));
    let estimate = |v: &DVector<f64>, e: f64| g.dot(v) / e.powf(1.0 / p);
    let (mut e, _, _) = energy_terms(space, &v);
    let mut est = estimate(&v, e);
    let mut last_change = f64::INFINITY;
    for _ in 0..DUAL_NORM_MAX_ITER {
        let (en, grad_e, hess) = energy_terms(space, &v);
        e = en;
        let r = &grad_e - g;
        let delta = match hess.solve(&(-&r)) {
            Ok(d) => d,
            Err(_) => -&r,
        };
        let slope = r.dot(&delta);
        let phi0 = e / p - g.dot(&v);
        if slope >= 0.0 || -slope <= 1e-24 * (e / p).max(1.0) {
            return Ok(est);
        }
        let mut s = 1.0;
        let mut trial = &v + &delta * s;
        let mut e_trial = energy(&trial);
        while e_trial / p - g.dot(&trial) > phi0 + 1e-4 * s * slope && s > 1e-12 {
            s *= 0.5;
            trial = &v + &delta * s;
            e_trial = energy(&trial);
        }
        let phi1 = e_trial / p - g.dot(&trial);
        let stalled = (phi0 - phi1).abs() <= 1e-14 * phi0.abs().max(f64::MIN_POSITIVE);
        v = trial;
        e = e_trial;
        let new_est = estimate(&v, e);
        last_change = (new_est - est).abs() / new_est.abs().max(f64::MIN_POSITIVE);
        est = new_est;
        if last_change <= DUAL_NORM_RTOL * 1e-2 && (s == 1.0 || stalled) {
            return Ok(est);
        }
    }
    let _ = e;
    Err(Error::DualNormNonConvergence {
        iterations: DUAL_NORM_MAX_ITER,
        last_change,
    })
}

/// Where the multivalued term acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    /// `U = H = L²` and `ι` is the identity embedding; `U`-elements are
    /// sampled at the two Gauss points of every element.
    Source,
    /// `U = ℝ²` and `ι` is the trace `u ↦ (u(0), u(L))`.
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub mode: EmbeddingMode,
    /// `‖ι‖_{L(V;U)}`; computed for `p = 2`, required from the user otherwise.
    pub iota_norm_bound: Option<f64>,
    /// `‖p‖_{L(H;U)}` for growth case A; the identity has norm 1.
    pub p_map_norm_bound: Option<f64>,
}

impl EmbeddingSpec {
    pub fn source() -> Self {
        Self {
            mode: EmbeddingMode::Source,
            iota_norm_bound: None,
            p_map_norm_bound: Some(1.0),
        }
    }

    pub fn boundary() -> Self {
        Self {
            mode: EmbeddingMode::Boundary,
            iota_norm_bound: None,
            p_map_norm_bound: None,
        }
    }

    pub fn with_iota_bound(mut self, bound: f64) -> Self {
        self.iota_norm_bound = Some(bound);
        self
    }
}

/// An element of `U` (or of `U*`, identified through the same layout).
pub type UVector = DVector<f64>;

/// The map `ι: V_h → U` bound to a space.
#[derive(Clone, Debug)]
pub struct Embedding {
    space: Arc<FemSpace>,
    spec: EmbeddingSpec,
    iota_norm: f64,
    /// `(position, weight, element)` of each source-mode sample.
    samples: Vec<(f64, f64, usize)>,
}

impl Embedding {
    pub fn new(space: Arc<FemSpace>, spec: EmbeddingSpec) -> Result<Self> {
        if spec.mode == EmbeddingMode::Boundary && space.mesh().bc() == BoundaryCondition::Dirichlet {
            return Err(Error::ModeMismatch(
                "the trace embedding needs a space without Dirichlet conditions".into(),
            ));
        }
        let mesh = space.mesh();
        let samples = match spec.mode {
            EmbeddingMode::Source => (0..mesh.element_count())
                .flat_map(|e| {
                    let (a, b) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
                    mapped(&GAUSS2, a, b).map(move |(x, w)| (x, w, e)).collect::<Vec<_>>()
                })
                .collect(),
            EmbeddingMode::Boundary => vec![(0.0, 1.0, 0), (mesh.length(), 1.0, mesh.element_count() - 1)],
        };
        let mut emb = Self {
            space,
            spec,
            iota_norm: f64::NAN,
            samples,
        };
        emb.iota_norm = emb.compute_iota_norm()?;
        Ok(emb)
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    pub fn mode(&self) -> EmbeddingMode {
        self.spec.mode
    }

    /// Length of `U`-vectors.
    pub fn u_dim(&self) -> usize {
        self.samples.len()
    }

    /// Positions at which the multivalued term is sampled.
    pub fn sample_points(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    /// Quadrature weight of each sample (1 in boundary mode).
    pub fn sample_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    pub fn apply(&self, u: &DiscreteFunction) -> Result<UVector> {
        u.check_space(&self.space)?;
        let vals = u.nodal_values();
        let nodes = self.space.mesh().nodes();
        Ok(DVector::from_iterator(
            self.samples.len(),
            self.samples.iter().map(|&(x, _, e)| {
                let s = (x - nodes[e]) / (nodes[e + 1] - nodes[e]);
                vals[e] * (1.0 - s) + vals[e + 1] * s
            }),
        ))
    }

    /// `ι*ξ`, defined through `⟨ι*ξ, v⟩ = ⟨ξ, ιv⟩_{U*×U}`.
    pub fn adjoint(&self, xi: &UVector) -> Result<DualVector> {
        self.check_u(xi)?;
        let mesh = self.space.mesh();
        let nodes = mesh.nodes();
        let mut out = DVector::zeros(self.space.dim());
        for (k, &(x, w, e)) in self.samples.iter().enumerate() {
            let s = (x - nodes[e]) / (nodes[e + 1] - nodes[e]);
            let dofs = mesh.element_dofs(e);
            if let Some(i) = dofs[0] {
                out[i] += w * xi[k] * (1.0 - s);
            }
            if let Some(j) = dofs[1] {
                out[j] += w * xi[k] * s;
            }
        }
        Ok(DualVector {
            space: Arc::clone(&self.space),
            values: out,
        })
    }

    /// `ι* diag(d) ι`, the linearization of a pointwise term with slopes `d`.
    pub fn adjoint_diag_apply(&self, slopes: &UVector) -> Result<Tridiagonal> {
        self.check_u(slopes)?;
        let mesh = self.space.mesh();
        let nodes = mesh.nodes();
        let mut t = Tridiagonal::zeros(self.space.dim());
        for (k, &(x, w, e)) in self.samples.iter().enumerate() {
            let s = (x - nodes[e]) / (nodes[e + 1] - nodes[e]);
            let phi = [1.0 - s, s];
            let dofs = mesh.element_dofs(e);
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                        t.add(i, j, w * slopes[k] * phi[a] * phi[b]);
                    }
                }
            }
        }
        Ok(t)
    }

    /// `⟨ξ, u⟩_{U*×U}`.
    pub fn pairing(&self, xi: &UVector, u: &UVector) -> Result<f64> {
        self.check_u(xi)?;
        self.check_u(u)?;
        Ok(self
            .samples
            .iter()
            .zip(xi.iter().zip(u.iter()))
            .map(|(s, (a, b))| s.1 * a * b)
            .sum())
    }

    /// Norm on `U` (and on `U*`, both are Hilbert in the realized modes).
    pub fn u_norm(&self, xi: &UVector) -> Result<f64> {
        Ok(self.pairing(xi, xi)?.max(0.0).sqrt())
    }

    fn check_u(&self, xi: &UVector) -> Result<()> {
        if xi.len() != self.samples.len() {
            return Err(Error::ModeMismatch(format!(
                "U-vector of length {} does not match the {:?} layout of length {}",
                xi.len(),
                self.spec.mode,
                self.samples.len()
            )));
        }
        Ok(())
    }

    /// `‖ι‖_{L(V;U)}`.
    pub fn iota_norm(&self) -> f64 {
        self.iota_norm
    }

    /// `‖p‖_{L(H;U)}` when a factorization `ι = p ∘ i` exists.
    pub fn p_map_norm(&self) -> Option<f64> {
        match self.spec.mode {
            EmbeddingMode::Source => Some(self.spec.p_map_norm_bound.unwrap_or(1.0)),
            EmbeddingMode::Boundary => None,
        }
    }

    fn compute_iota_norm(&self) -> Result<f64> {
        if self.space.p != 2.0 {
            return self
                .spec
                .iota_norm_bound
                .ok_or(Error::MissingEmbeddingBound(self.space.p));
        }
        // largest eigenvalue of G^{-1} ι*ι by power iteration
        let ata = self.adjoint_diag_apply(&DVector::from_element(self.u_dim(), 1.0))?;
        let n = self.space.dim();
        let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.01 * (i as f64 + 1.0).sin());
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let y = self.space.gram_factor.solve(&ata.mul_vec(&x));
            let num = y.dot(&ata.mul_vec(&y));
            let den = y.dot(&self.space.gram.mul_vec(&y));
            let next = num / den;
            let nrm = y.norm();
            x = y / nrm;
            if (next - lambda).abs() <= 1e-15 * next.abs() {
                lambda = next;
                break;
            }
            lambda = next;
        }
        Ok(lambda.sqrt())
    }
}
