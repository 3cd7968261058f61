//! The quasilinear operator
//!
//! ```text
//! A(t, u) = −(μ(t) |u'|^{p−2} u')' + ρ |u|^{p−2} u + b(u),   b(s) = −κ s / (1 + s²),
//! ```
//!
//! its slab averages, the slab-averaged load, and sampling validators for
//! the coercivity, growth and Hölder hypotheses. Validators can only
//! falsify: a passing report means no violation was found on the samples.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryCondition, DiscreteFunction, DualVector, FemSpace, SpaceExt};
use crate::linalg::Tridiagonal;
use crate::quadrature::{mapped, mean, GAUSS2, GAUSS3};
use crate::time_grid::TimeGrid;

/// Tolerance on relative margins reported by the validators.
pub const VALIDATION_TOL: f64 = 1e-9;

/// A scalar profile of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// `Σ c_i t^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `c0 + c1 cos(ω t)`.
    Cos { c0: f64, c1: f64, omega: f64 },
}

impl TimeProfile {
    pub fn constant(c: f64) -> Self {
        TimeProfile::Polynomial { coeffs: vec![c] }
    }

    pub fn affine(c0: f64, c1: f64) -> Self {
        TimeProfile::Polynomial { coeffs: vec![c0, c1] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            TimeProfile::Cos { c0, c1, omega } => c0 + c1 * (omega * t).cos(),
        }
    }

    /// Exact `∫_a^b` of the profile.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            TimeProfile::Polynomial { coeffs } => {
                let anti = |t: f64| {
                    coeffs
                        .iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (i, c)| acc * t + c / (i as f64 + 1.0))
                        * t
                };
                anti(b) - anti(a)
            }
            TimeProfile::Cos { c0, c1, omega } => {
                if *omega == 0.0 {
                    (c0 + c1) * (b - a)
                } else {
                    c0 * (b - a) + c1 * ((omega * b).sin() - (omega * a).sin()) / omega
                }
            }
        }
    }

    /// `(min, max)` over `[0, horizon]` from a dense sample.
    pub fn bounds(&self, horizon: f64) -> (f64, f64) {
        if let TimeProfile::Cos { c0, c1, omega } = self {
            if omega.abs() * horizon >= 2.0 * std::f64::consts::PI {
                return (c0 - c1.abs(), c0 + c1.abs());
            }
        }
        (0..=4096)
            .map(|i| self.eval(horizon * i as f64 / 4096.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// `a(s) = a0 + a1 s`, nondecreasing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub a0: f64,
    pub a1: f64,
}

impl GrowthBound {
    pub fn eval(&self, s: f64) -> f64 {
        self.a0 + self.a1 * s
    }
}

/// Hölder continuity in time:
/// `‖A(t,v) − A(s,v)‖_* ≤ (c1 + c2 ‖v‖^δ) |t − s|^γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderSpec {
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
    pub delta: f64,
}

/// Data of the operator together with its claimed hypothesis constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub p: f64,
    /// Claimed coercivity constant `α > 0`.
    pub alpha: f64,
    /// Claimed constant `β ≥ 0`.
    pub beta: f64,
    pub growth: GrowthBound,
    pub holder: Option<HolderSpec>,
    pub mu: TimeProfile,
    /// Strength of the nonmonotone perturbation.
    pub kappa: f64,
    /// Coefficient of the monotone reaction term.
    #[serde(default)]
    pub reaction: f64,
}

impl OperatorSpec {
    /// Pure p-Laplacian `−(μ(t)|u'|^{p−2}u')'`.
    pub fn p_laplacian(p: f64, mu: TimeProfile) -> Self {
        Self {
            p,
            alpha: 1.0,
            beta: 0.0,
            growth: GrowthBound { a0: 1.0, a1: 0.0 },
            holder: None,
            mu,
            kappa: 0.0,
            reaction: 0.0,
        }
    }

    /// Checks the structural constraints on the claimed constants.
    pub fn check(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(Error::InvalidArgument(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) || !(self.kappa >= 0.0) || !(self.reaction >= 0.0) {
            return Err(Error::InvalidArgument("beta, kappa and reaction must be nonnegative".into()));
        }
        if self.growth.a0 < 0.0 || self.growth.a1 < 0.0 {
            return Err(Error::InvalidArgument("growth function must be nonnegative and nondecreasing".into()));
        }
        if let Some(h) = &self.holder {
            if !(h.gamma > 0.0 && h.gamma <= 1.0) {
                return Err(Error::InvalidArgument(format!("Hoelder exponent must lie in (0, 1], got {}", h.gamma)));
            }
            if !(h.delta > 0.0 && h.delta < self.p * (h.gamma + 1.0) - 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "delta must lie in (0, p(γ+1)−1) = (0, {}), got {}",
                    self.p * (h.gamma + 1.0) - 1.0,
                    h.delta
                )));
            }
            if h.c1 < 0.0 || h.c2 < 0.0 {
                return Err(Error::InvalidArgument("Hoelder constants must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Checks `μ(t) ≥ μ_lo > 0` on `[0, horizon]` and returns `(μ_lo, μ_hi)`.
    pub fn mu_bounds(&self, horizon: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.mu.bounds(horizon);
        if !(lo > 0.0) {
            return Err(Error::InvalidArgument(format!("μ(t) must stay positive, minimum {lo}")));
        }
        Ok((lo, hi))
    }

    /// A constant growth bound valid for this operator on `space`:
    /// `a = μ_hi + ρ + (κ/2) √L C_H` with `C_H` bounding `‖·‖_H / ‖·‖`.
    pub fn conservative_growth(&self, space: &FemSpace, horizon: f64) -> GrowthBound {
        let (_, mu_hi) = self.mu.bounds(horizon);
        let l = space.mesh().length();
        let q = space.q();
        let c_h = match space.mesh().bc() {
            BoundaryCondition::Dirichlet => l.powf(0.5 + 1.0 / q),
            BoundaryCondition::Natural => l.powf((0.5 - 1.0 / self.p).max(0.0)),
        };
        GrowthBound {
            a0: mu_hi + self.reaction + 0.5 * self.kappa * l.sqrt() * c_h,
            a1: 0.0,
        }
    }

    /// The perturbation `b(s)`.
    pub fn perturbation(&self, s: f64) -> f64 {
        -self.kappa * s / (1.0 + s * s)
    }

    fn perturbation_slope(&self, s: f64) -> f64 {
        let d = 1.0 + s * s;
        -self.kappa * (1.0 - s * s) / (d * d)
    }

    /// `⟨A(t, u), φ_i⟩`.
    pub fn apply(&self, t: f64, u: &DiscreteFunction) -> Result<DualVector> {
        self.check_exponent(u.space())?;
        self.assemble(self.mu.eval(t), u)
    }

    /// Linearization of `u ↦ A(t, u)` (a generalized Jacobian for `p < 2`).
    pub fn jacobian(&self, t: f64, u: &DiscreteFunction) -> Result<Tridiagonal> {
        self.check_exponent(u.space())?;
        Ok(self.assemble_jacobian(self.mu.eval(t), u))
    }

    /// `A^k(u) = (1/τ^k) ∫_{slab k} A(t, u) dt` by three-point Gauss in time.
    /// The assembly is linear in `μ`, so this is the assembly with the
    /// Gauss mean of `μ` over the slab.
    pub fn slab_average(&self, grid: &TimeGrid, k: usize, u: &DiscreteFunction) -> Result<DualVector> {
        self.check_exponent(u.space())?;
        self.assemble(self.slab_mu(grid, k)?, u)
    }

    pub fn slab_average_jacobian(&self, grid: &TimeGrid, k: usize, u: &DiscreteFunction) -> Result<Tridiagonal> {
        self.check_exponent(u.space())?;
        Ok(self.assemble_jacobian(self.slab_mu(grid, k)?, u))
    }

    /// Three-point Gauss mean of `μ` over slab `k`.
    pub fn slab_mu(&self, grid: &TimeGrid, k: usize) -> Result<f64> {
        if k == 0 || k > grid.count() {
            return Err(Error::InvalidArgument(format!("slab {k} outside 1..={}", grid.count())));
        }
        let (a, b) = grid.slab(k);
        Ok(mean(&GAUSS3, a, b, |t| self.mu.eval(t)))
    }

    fn check_exponent(&self, space: &FemSpace) -> Result<()> {
        if space.p() != self.p {
            return Err(Error::InvalidArgument(format!(
                "operator exponent {} differs from the space exponent {}",
                self.p,
                space.p()
            )));
        }
        Ok(())
    }

    fn assemble(&self, mu: f64, u: &DiscreteFunction) -> Result<DualVector> {
        let space = u.space();
        let mesh = space.mesh();
        let p = self.p;
        let vals = u.nodal_values();
        let grads = u.gradients();
        let mut out = DVector::zeros(space.dim());
        for e in 0..mesh.element_count() {
            let g = grads[e];
            let flux = mu * g.abs().powf(p - 2.0) * g;
            let (left, right) = (mesh.free_index(e), mesh.free_index(e + 1));
            if let Some(i) = left {
                out[i] -= flux;
            }
            if let Some(j) = right {
                out[j] += flux;
            }
            if self.reaction != 0.0 || self.kappa != 0.0 {
                let (a, b) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
                for (x, w) in mapped(&GAUSS2, a, b) {
                    let s = (x - a) / (b - a);
                    let uq = vals[e] * (1.0 - s) + vals[e + 1] * s;
                    let val = w * (self.reaction * uq.abs().powf(p - 2.0) * uq + self.perturbation(uq));
                    if let Some(i) = left {
                        out[i] += val * (1.0 - s);
                    }
                    if let Some(j) = right {
                        out[j] += val * s;
                    }
                }
            }
        }
        space.dual(out)
    }

    fn assemble_jacobian(&self, mu: f64, u: &DiscreteFunction) -> Tridiagonal {
        let space = u.space();
        let mesh = space.mesh();
        let p = self.p;
        let vals = u.nodal_values();
        let grads = u.gradients();
        let gmax = grads.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
        let gfloor = 1e-10 * gmax.max(1e-300);
        let mut jac = Tridiagonal::zeros(space.dim());
        for e in 0..mesh.element_count() {
            let h = mesh.element_length(e);
            let curv = mu * (p - 1.0) * g_pow(grads[e], gfloor, p - 2.0) / h;
            let dofs = [mesh.free_index(e), mesh.free_index(e + 1)];
            let sign = [-1.0, 1.0];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                        jac.add(i, j, curv * sign[a] * sign[b]);
                    }
                }
            }
            if self.reaction != 0.0 || self.kappa != 0.0 {
                let (xa, xb) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
                for (x, w) in mapped(&GAUSS2, xa, xb) {
                    let s = (x - xa) / (xb - xa);
                    let phi = [1.0 - s, s];
                    let uq = vals[e] * phi[0] + vals[e + 1] * phi[1];
                    let slope = self.reaction * (p - 1.0) * g_pow(uq, 1e-300, p - 2.0)
                        + self.perturbation_slope(uq);
                    for a in 0..2 {
                        for b in 0..2 {
                            if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                                jac.add(i, j, w * slope * phi[a] * phi[b]);
                            }
                        }
                    }
                }
            }
        }
        jac
    }

    /// Samples `(t, v)` and reports the worst relative margins of
    /// `⟨A(t,v),v⟩ ≥ α‖v‖^p − β‖v‖²_H` and
    /// `‖A(t,v)‖_* ≤ a(‖v‖_H)(1 + ‖v‖^{p−1})`.
    pub fn validate_coercivity_growth(
        &self,
        space: &Arc<FemSpace>,
        horizon: f64,
        samples: usize,
        seed: u64,
    ) -> Result<HypothesisReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coercivity = Margin::default();
        let mut growth = Margin::default();
        for i in 0..samples {
            let t = rng.gen_range(0.0..=horizon);
            let v = sample_function(space, &mut rng, i);
            let av = self.apply(t, &v)?;
            let pairing = av.pair(&v)?;
            let vp = v.v_norm_pow();
            let h2 = v.h_norm().powi(2);
            coercivity.record(
                pairing - self.alpha * vp + self.beta * h2,
                1.0 + pairing.abs() + self.alpha * vp + self.beta * h2,
            );
            let dn = av.dual_norm()?;
            let bound = self.growth.eval(v.h_norm()) * (1.0 + v.v_norm().powf(self.p - 1.0));
            growth.record(bound - dn, 1.0 + bound + dn);
        }
        Ok(HypothesisReport {
            samples,
            margins: vec![("coercivity".into(), coercivity), ("growth".into(), growth)],
        })
    }

    /// Samples `(s, t, v)` and reports the worst ratio
    /// `‖A(t,v) − A(s,v)‖_* / ((c1 + c2‖v‖^δ)|t − s|^γ)`; passes when it is
    /// at most `1 + 1e-9`.
    pub fn validate_holder(
        &self,
        space: &Arc<FemSpace>,
        horizon: f64,
        samples: usize,
        seed: u64,
    ) -> Result<HolderReport> {
        let h = self.holder.ok_or(Error::MissingHolder)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        for i in 0..samples {
            let s = rng.gen_range(0.0..=horizon);
            let t = rng.gen_range(0.0..=horizon);
            if s == t {
                continue;
            }
            let v = sample_function(space, &mut rng, i);
            let diff = self.apply(t, &v)?.sub(&self.apply(s, &v)?)?.dual_norm()?;
            let bound = (h.c1 + h.c2 * v.v_norm().powf(h.delta)) * (t - s).abs().powf(h.gamma);
            let ratio = if bound > 0.0 {
                diff / bound
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        Ok(HolderReport {
            samples,
            worst_ratio: worst,
            pass: worst <= 1.0 + VALIDATION_TOL,
        })
    }
}

fn g_pow(g: f64, floor: f64, e: f64) -> f64 {
    if e >= 0.0 {
        g.abs().powf(e)
    } else {
        g.abs().max(floor).powf(e)
    }
}

/// Draws a test function: sample 0 is zero, others mix random nodal noise
/// and smooth modes at log-uniform scales.
pub(crate) fn sample_function(space: &Arc<FemSpace>, rng: &mut ChaCha8Rng, i: usize) -> DiscreteFunction {
    if i == 0 {
        return space.zero();
    }
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    let l = space.mesh().length();
    if rng.gen_bool(0.5) {
        let c = DVector::from_fn(space.dim(), |_, _| scale * rng.gen_range(-1.0..1.0));
        space.function(c).expect("length matches")
    } else {
        let modes: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..6.0), rng.gen_range(0.0..6.3)))
            .collect();
        let offset = rng.gen_range(-0.5..0.5);
        space.interpolate(|x| {
            scale
                * (offset
                    + modes
                        .iter()
                        .map(|(a, f, ph)| a * (std::f64::consts::PI * f * x / l + ph).sin())
                        .sum::<f64>())
        })
    }
}

/// Worst observed margin of one inequality, raw and relative to the size of
/// the terms involved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub worst: f64,
    pub worst_relative: f64,
}

impl Default for Margin {
    fn default() -> Self {
        Self {
            worst: f64::INFINITY,
            worst_relative: f64::INFINITY,
        }
    }
}

impl Margin {
    pub fn record(&mut self, margin: f64, scale: f64) {
        self.worst = self.worst.min(margin);
        self.worst_relative = self.worst_relative.min(margin / scale);
    }

    pub fn pass(&self) -> bool {
        self.worst_relative >= -VALIDATION_TOL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub samples: usize,
    pub margins: Vec<(String, Margin)>,
}

impl HypothesisReport {
    pub fn pass(&self) -> bool {
        self.margins.iter().all(|(_, m)| m.pass())
    }

    pub fn margin(&self, name: &str) -> Option<Margin> {
        self.margins.iter().find(|(n, _)| n == name).map(|(_, m)| *m)
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, m) in &self.margins {
            let verdict = if m.pass() { "no violation found" } else { "VIOLATED" };
            writeln!(f, "  {name:<14} worst margin {:+.3e} (relative {:+.3e}): {verdict}", m.worst, m.worst_relative)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub samples: usize,
    pub worst_ratio: f64,
    pub pass: bool,
}

/// A source `f(t, x)` acting through `⟨f(t), v⟩ = ∫ f(t, x) v(x) dx`.
#[derive(Clone)]
pub struct SourceSpec {
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SourceSpec(..)")
    }
}

impl SourceSpec {
    pub fn new<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn load_at(&self, space: &Arc<FemSpace>, t: f64) -> DualVector {
        space.load(|x| self.eval(t, x))
    }

    /// `f^k = (1/τ^k) ∫_{slab k} f(t) dt` by three-point Gauss in time.
    pub fn slab_average(&self, space: &Arc<FemSpace>, grid: &TimeGrid, k: usize) -> Result<DualVector> {
        if k == 0 || k > grid.count() {
            return Err(Error::InvalidArgument(format!("slab {k} outside 1..={}", grid.count())));
        }
        let (a, b) = grid.slab(k);
        let tau = b - a;
        let mut acc = space.zero_dual();
        for (t, w) in mapped(&GAUSS3, a, b) {
            acc = acc.lin_comb(1.0, &self.load_at(space, t), w / tau)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::SpatialMesh;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn space(m: usize, p: f64) -> Arc<FemSpace> {
        FemSpace::new(SpatialMesh::uniform(1.0, m, BoundaryCondition::Dirichlet).unwrap(), p).unwrap()
    }

    fn hat(s: &Arc<FemSpace>) -> DiscreteFunction {
        s.function(DVector::from_element(1, 1.0)).unwrap()
    }

    #[test]
    fn apply_examples() {
        let s2 = space(2, 2.0);
        let lap = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
        assert_eq!(lap.apply(0.3, &s2.zero()).unwrap().values.amax(), 0.0);
        assert_relative_eq!(lap.apply(0.0, &hat(&s2)).unwrap().values[0], 4.0, epsilon = 1e-14);

        let s4 = space(2, 4.0);
        let lap4 = OperatorSpec::p_laplacian(4.0, TimeProfile::constant(1.0));
        assert_relative_eq!(lap4.apply(0.0, &hat(&s4)).unwrap().values[0], 16.0, epsilon = 1e-13);
    }

    #[test]
    fn slab_average_examples() {
        let s = space(6, 3.0);
        let u = s.interpolate(|x| (4.0 * x).sin());
        let grid = TimeGrid::uniform(1.0, 1).unwrap();

        let c = OperatorSpec::p_laplacian(3.0, TimeProfile::constant(2.5));
        let avg = c.slab_average(&grid, 1, &u).unwrap();
        assert!((&avg.values - &c.apply(0.37, &u).unwrap().values).amax() < 1e-14);

        let lin = OperatorSpec::p_laplacian(3.0, TimeProfile::affine(0.0, 1.0));
        let half = OperatorSpec::p_laplacian(3.0, TimeProfile::constant(0.5));
        let d = &lin.slab_average(&grid, 1, &u).unwrap().values - &half.apply(0.0, &u).unwrap().values;
        assert!(d.amax() < 1e-13);

        let quad = OperatorSpec::p_laplacian(3.0, TimeProfile::Polynomial { coeffs: vec![0.0, 0.0, 1.0] });
        assert_relative_eq!(quad.slab_mu(&grid, 1).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn source_slab_average_examples() {
        let s = space(5, 2.0);
        let grid = TimeGrid::from_points(&[0.0, 0.3, 0.7]).unwrap();
        let g = |x: f64| x * x + 1.0;
        let constant = SourceSpec::new(move |_, x| g(x));
        let avg = constant.slab_average(&s, &grid, 2).unwrap();
        assert!((&avg.values - &s.load(g).values).amax() < 1e-15);

        let linear = SourceSpec::new(move |t, x| t * g(x));
        let avg = linear.slab_average(&s, &grid, 2).unwrap();
        let expected = s.load(g).values * 0.5;
        assert!((&avg.values - &expected).amax() < 1e-14);

        assert_eq!(SourceSpec::zero().slab_average(&s, &grid, 1).unwrap().values.amax(), 0.0);
        assert!(SourceSpec::zero().slab_average(&s, &grid, 3).is_err());
    }

    #[test]
    fn coercivity_validator_examples() {
        let s = space(8, 3.0);
        let lap = OperatorSpec::p_laplacian(3.0, TimeProfile::constant(1.0));
        let rep = lap.validate_coercivity_growth(&s, 1.0, 60, 1).unwrap();
        assert!(rep.pass(), "{rep}");
        // the zero sample contributes an exact zero margin
        assert!(rep.margin("coercivity").unwrap().worst <= 1e-12);

        let greedy = OperatorSpec { alpha: 2.0, ..lap };
        let rep = greedy.validate_coercivity_growth(&s, 1.0, 60, 1).unwrap();
        assert!(!rep.margin("coercivity").unwrap().pass());
    }

    #[test]
    fn perturbed_operator_constants_hold() {
        let s = space(10, 2.0);
        let mut spec = OperatorSpec::p_laplacian(2.0, TimeProfile::affine(1.0, 0.5));
        spec.kappa = 1.0;
        spec.beta = 1.0;
        spec.growth = spec.conservative_growth(&s, 1.0);
        let rep = spec.validate_coercivity_growth(&s, 1.0, 200, 3).unwrap();
        assert!(rep.pass(), "{rep}");
    }

    #[test]
    fn holder_validator_examples() {
        let s = space(8, 2.0);
        let mut c = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
        assert!(matches!(c.validate_holder(&s, 1.0, 10, 0), Err(Error::MissingHolder)));
        c.holder = Some(HolderSpec { c1: 0.0, c2: 1.0, gamma: 1.0, delta: 1.0 });
        let r = c.validate_holder(&s, 1.0, 50, 0).unwrap();
        assert!(r.pass && r.worst_ratio == 0.0);

        let mut lin = OperatorSpec::p_laplacian(2.0, TimeProfile::affine(0.0, 1.0));
        lin.holder = Some(HolderSpec { c1: 0.0, c2: 1.0, gamma: 1.0, delta: 1.0 });
        let r = lin.validate_holder(&s, 1.0, 100, 2).unwrap();
        assert!(r.pass, "{r:?}");
        // the bound is attained: ‖Δv‖_* = ‖v‖ for p = 2
        assert!(r.worst_ratio > 0.999);

        lin.holder = Some(HolderSpec { c1: 0.0, c2: 1.0, gamma: 0.5, delta: 1.0 });
        assert!(lin.validate_holder(&s, 1.0, 100, 2).unwrap().pass);

        lin.holder = Some(HolderSpec { c1: 0.0, c2: 0.5, gamma: 1.0, delta: 1.0 });
        assert!(!lin.validate_holder(&s, 1.0, 100, 2).unwrap().pass);
    }

    #[test]
    fn check_rejects_bad_delta() {
        let mut c = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
        c.holder = Some(HolderSpec { c1: 0.1, c2: 1.0, gamma: 1.0, delta: 3.0 });
        assert!(c.check().is_err());
        c.holder = Some(HolderSpec { c1: 0.1, c2: 1.0, gamma: 1.0, delta: 2.9 });
        assert!(c.check().is_ok());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = space(7, 3.0);
        let mut spec = OperatorSpec::p_laplacian(3.0, TimeProfile::constant(1.3));
        spec.kappa = 0.7;
        spec.reaction = 0.4;
        let u = s.interpolate(|x| (5.0 * x).sin() + 0.3);
        let jac = spec.jacobian(0.0, &u).unwrap();
        let h = 1e-6;
        for j in 0..s.dim() {
            let mut up = u.clone();
            up.coeffs[j] += h;
            let mut dn = u.clone();
            dn.coeffs[j] -= h;
            let col = (spec.apply(0.0, &up).unwrap().values - spec.apply(0.0, &dn).unwrap().values) / (2.0 * h);
            let mut e = DVector::zeros(s.dim());
            e[j] = 1.0;
            assert!((col - jac.mul_vec(&e)).amax() < 1e-6);
        }
    }

    #[test]
    fn time_profile_integrals() {
        let p = TimeProfile::Polynomial { coeffs: vec![1.0, 2.0, 3.0] };
        assert_relative_eq!(p.integral(0.0, 2.0), 2.0 + 4.0 + 8.0, epsilon = 1e-14);
        let c = TimeProfile::Cos { c0: 1.0, c1: 1.0, omega: std::f64::consts::PI };
        assert_relative_eq!(c.integral(0.0, 1.0), 1.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn assembly_linear_in_mu(c in 0.1f64..10.0, seed in any::<u64>()) {
            let s = space(9, 3.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = sample_function(&s, &mut rng, 1);
            let base = OperatorSpec::p_laplacian(3.0, TimeProfile::affine(1.0, 2.0));
            let scaled = OperatorSpec::p_laplacian(3.0, TimeProfile::affine(c, 2.0 * c));
            let a = base.apply(0.4, &u).unwrap().values * c;
            let b = scaled.apply(0.4, &u).unwrap().values;
            prop_assert!((&a - &b).amax() <= 1e-12 * (1.0 + a.amax()));
        }

        #[test]
        fn principal_part_monotone(seed in any::<u64>()) {
            let s = space(9, 2.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = sample_function(&s, &mut rng, 1);
            let w = sample_function(&s, &mut rng, 2);
            let op = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
            let d = op.apply(0.0, &v).unwrap().sub(&op.apply(0.0, &w).unwrap()).unwrap();
            prop_assert!(d.pair(&v.sub(&w).unwrap()).unwrap() >= -1e-12);
        }
    }
}
