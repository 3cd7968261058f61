//! The θ-scheme time march
//!
//! Each step solves, for `w = u^{k−1+θ} = θ u^k + (1−θ) u^{k−1}`,
//!
//! ```text
//! M (w − u^{k−1}) / (θ τ^k) + A^k(w) + ι* F^k_ε(ι w) = f^k
//! ```
//!
//! and recovers `u^k = (w − (1−θ) u^{k−1}) / θ`. The multivalued term is
//! replaced by its `ε`-regularized surrogate with `ε^k = max(ε_min, c_ε τ^k)`.

use std::sync::Arc;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DiscreteFunction, DualVector, Embedding, EmbeddingMode, EmbeddingSpec, FemSpace, SpaceExt, UVector};
use crate::linalg::Tridiagonal;
use crate::multifunction::{FilledGraph, GrowthParams, Membership, RegularizedSelection};
use crate::operators::{OperatorSpec, SourceSpec};
use crate::time_grid::TimeGrid;

/// Solver settings of the scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaConfig {
    pub theta: f64,
    /// Tolerance on the dual norm of the per-step residual.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Smallest backtracking factor before Newton is declared stagnant.
    pub damping_floor: f64,
    pub eps_min: f64,
    pub c_eps: f64,
    pub picard_fallback: bool,
    pub picard_max_iter: usize,
    /// Turn `τ > τ₀` from a warning into an error.
    pub strict_admissibility: bool,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            damping_floor: 2f64.powi(-20),
            eps_min: 1e-8,
            c_eps: 0.5,
            picard_fallback: true,
            picard_max_iter: 500,
            strict_admissibility: false,
        }
    }
}

impl ThetaConfig {
    pub fn new(theta: f64) -> Result<Self> {
        let cfg = Self {
            theta,
            ..Self::default()
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidTheta(self.theta));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument("newton_tol and newton_max_iter must be positive".into()));
        }
        if !(self.eps_min > 0.0) || !(self.c_eps >= 0.0) {
            return Err(Error::InvalidArgument("eps_min must be positive and c_eps nonnegative".into()));
        }
        if !(self.damping_floor > 0.0 && self.damping_floor < 1.0) {
            return Err(Error::InvalidArgument("damping_floor must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// `ε^k = max(ε_min, c_ε τ)`.
    pub fn epsilon(&self, tau: f64) -> f64 {
        self.eps_min.max(self.c_eps * tau)
    }
}

/// The multivalued part of a problem.
#[derive(Clone, Debug)]
pub struct Inclusion {
    pub graph: FilledGraph,
    pub growth: GrowthParams,
    pub embedding: Embedding,
}

/// Everything a trajectory needs besides the grid and the scheme settings.
#[derive(Clone, Debug)]
pub struct Problem {
    pub space: Arc<FemSpace>,
    pub operator: OperatorSpec,
    pub inclusion: Option<Inclusion>,
    pub source: SourceSpec,
}

/// A step-size threshold; `strict` means `τ < τ₀` is required rather than `τ ≤ τ₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tau0 {
    pub value: f64,
    pub strict: bool,
}

impl Tau0 {
    pub fn admits(&self, tau: f64) -> bool {
        if self.strict {
            tau < self.value
        } else {
            tau <= self.value
        }
    }
}

/// `τ₀ = 1/(θ(β + d₁‖p‖²))` (strict) in case A and `τ₀ = 1/(θβ)` in case B
/// or without a multivalued term; `+∞` when the denominator vanishes.
pub fn admissible_tau0(
    operator: &OperatorSpec,
    growth: Option<&GrowthParams>,
    embedding: &EmbeddingSpec,
    theta: f64,
) -> Result<Tau0> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidTheta(theta));
    }
    let (den, strict) = match growth {
        Some(GrowthParams::A { d1, .. }) => {
            let p_norm = match embedding.mode {
                EmbeddingMode::Source => embedding.p_map_norm_bound.unwrap_or(1.0),
                EmbeddingMode::Boundary => {
                    return Err(Error::ModeMismatch(
                        "growth case A needs a factorization through H, which the trace embedding lacks".into(),
                    ))
                }
            };
            (theta * (operator.beta + d1 * p_norm * p_norm), true)
        }
        Some(GrowthParams::B { .. }) | None => (theta * operator.beta, false),
    };
    let value = if den > 0.0 { 1.0 / den } else { f64::INFINITY };
    Ok(Tau0 { value, strict })
}

/// Outcome of one step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub u: DiscreteFunction,
    /// `u^{k−1+θ}`.
    pub w: DiscreteFunction,
    /// The selection `ξ^k` in `U`-representation (empty without inclusion).
    pub xi: UVector,
    pub meta: StepMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMeta {
    pub iterations: usize,
    pub residual: f64,
    /// Largest horizontal distance from `(ιw, ξ/m̄)` to the graph of `F`.
    pub clamp_distance: f64,
    pub epsilon: f64,
    pub picard: bool,
    pub admissible: bool,
}

/// Frozen data of one slab.
struct Slab<'a> {
    problem: &'a Problem,
    grid: &'a TimeGrid,
    k: usize,
    theta: f64,
    tau: f64,
    u_prev: &'a DiscreteFunction,
    f_bar: DualVector,
    m_bar: f64,
    reg: Option<RegularizedSelection>,
}

impl<'a> Slab<'a> {
    fn new(cfg: &ThetaConfig, problem: &'a Problem, grid: &'a TimeGrid, k: usize, u_prev: &'a DiscreteFunction) -> Result<Self> {
        let tau = grid.tau(k);
        let (m_bar, reg) = match &problem.inclusion {
            Some(inc) => (inc.graph.slab_modulation(grid, k)?, Some(inc.graph.regularize(cfg.epsilon(tau))?)),
            None => (0.0, None),
        };
        Ok(Self {
            problem,
            grid,
            k,
            theta: cfg.theta,
            tau,
            u_prev,
            f_bar: problem.source.slab_average(&problem.space, grid, k)?,
            m_bar,
            reg,
        })
    }

    fn selection(&self, w: &DiscreteFunction) -> Result<(UVector, UVector)> {
        match (&self.problem.inclusion, &self.reg) {
            (Some(inc), Some(reg)) => Ok(reg.apply(self.m_bar, &inc.embedding.apply(w)?)),
            _ => Ok((UVector::zeros(0), UVector::zeros(0))),
        }
    }

    /// Residual with a given selection.
    fn residual_with(&self, w: &DiscreteFunction, xi: &UVector) -> Result<DualVector> {
        let space = &self.problem.space;
        let diff = w.sub(self.u_prev)?;
        let mut r = space.mass_apply(&diff)?.scaled(1.0 / (self.theta * self.tau));
        r = r.lin_comb(1.0, &self.problem.operator.slab_average(self.grid, self.k, w)?, 1.0)?;
        if let Some(inc) = &self.problem.inclusion {
            r = r.lin_comb(1.0, &inc.embedding.adjoint(xi)?, 1.0)?;
        }
        r.sub(&self.f_bar)
    }

    fn jacobian(&self, w: &DiscreteFunction, slopes: Option<&UVector>) -> Result<Tridiagonal> {
        let space = &self.problem.space;
        let mut j = space.mass().scaled(1.0 / (self.theta * self.tau));
        j.add_scaled(1.0, &self.problem.operator.slab_average_jacobian(self.grid, self.k, w)?);
        if let (Some(inc), Some(d)) = (&self.problem.inclusion, slopes) {
            j.add_scaled(1.0, &inc.embedding.adjoint_diag_apply(d)?);
        }
        Ok(j)
    }

    fn clamp_distance(&self, w: &DiscreteFunction, xi: &UVector) -> Result<f64> {
        let (Some(inc), Some(reg)) = (&self.problem.inclusion, &self.reg) else {
            return Ok(0.0);
        };
        let u = inc.embedding.apply(w)?;
        let radius = (4.0 * reg.epsilon()).max(1.0);
        let mut worst = 0.0_f64;
        for (&s, &x) in u.iter().zip(xi.iter()) {
            let d = if self.m_bar > 0.0 {
                inc.graph.horizontal_distance(s, x / self.m_bar, radius)
            } else if x == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// Damped Newton on the full residual; the flag is false on stagnation.
    fn newton(&self, cfg: &ThetaConfig, mut w: DiscreteFunction) -> Result<(DiscreteFunction, usize, f64, bool)> {
        let mut residual;
        for it in 0..cfg.newton_max_iter {
            let (xi, slopes) = self.selection(&w)?;
            let r = self.residual_with(&w, &xi)?;
            residual = r.dual_norm()?;
            if residual <= cfg.newton_tol {
                return Ok((w, it, residual, true));
            }
            let jac = self.jacobian(&w, Some(&slopes))?;
            let Ok(delta) = jac.solve(&(-&r.values)) else {
                debug!("slab {}: singular Newton matrix", self.k);
                return Ok((w, it, residual, false));
            };
            let merit0 = r.riesz_norm();
            let mut s = 1.0;
            loop {
                let trial = self.problem.space.function(&w.coeffs + &delta * s)?;
                let (xt, _) = self.selection(&trial)?;
                let merit = self.residual_with(&trial, &xt)?.riesz_norm();
                if merit < (1.0 - 1e-4 * s) * merit0 {
                    w = trial;
                    break;
                }
                s *= 0.5;
                if s < cfg.damping_floor {
                    debug!("slab {}: Newton stagnated at residual {residual:e}", self.k);
                    return Ok((w, it, residual, false));
                }
            }
        }
        let (xi, _) = self.selection(&w)?;
        let residual = self.residual_with(&w, &xi)?.dual_norm()?;
        let ok = residual <= cfg.newton_tol;
        Ok((w, cfg.newton_max_iter, residual, ok))
    }

    /// Lags the selection and solves the remaining smooth problem by Newton.
    fn picard(&self, cfg: &ThetaConfig, mut w: DiscreteFunction) -> Result<(DiscreteFunction, usize, f64, bool)> {
        let (mut lag, _) = self.selection(&w)?;
        let mut residual = f64::INFINITY;
        let mut total = 0;
        for _ in 0..cfg.picard_max_iter {
            for _ in 0..cfg.newton_max_iter {
                total += 1;
                let r = self.residual_with(&w, &lag)?;
                if r.riesz_norm() <= 1e-3 * cfg.newton_tol {
                    break;
                }
                let delta = self.jacobian(&w, None)?.solve(&(-&r.values))?;
                let merit0 = r.riesz_norm();
                let mut s = 1.0;
                loop {
                    let trial = self.problem.space.function(&w.coeffs + &delta * s)?;
                    if self.residual_with(&trial, &lag)?.riesz_norm() < merit0 || s < cfg.damping_floor {
                        w = trial;
                        break;
                    }
                    s *= 0.5;
                }
                if s < cfg.damping_floor {
                    break;
                }
            }
            let (xi, _) = self.selection(&w)?;
            residual = self.residual_with(&w, &xi)?.dual_norm()?;
            if residual <= cfg.newton_tol {
                return Ok((w, total, residual, true));
            }
            lag = &lag * 0.5 + &xi * 0.5;
        }
        Ok((w, total, residual, false))
    }
}

/// One θ-step on slab `k` from `u_prev`.
pub fn step(cfg: &ThetaConfig, problem: &Problem, grid: &TimeGrid, k: usize, u_prev: &DiscreteFunction) -> Result<StepResult> {
    cfg.check()?;
    u_prev.same_space(&problem.space.zero())?;
    if k == 0 || k > grid.count() {
        return Err(Error::InvalidArgument(format!("slab {k} outside 1..={}", grid.count())));
    }
    let tau = grid.tau(k);
    let inclusion = problem.inclusion.as_ref();
    let spec = inclusion.map(|i| *i.embedding.spec()).unwrap_or_else(EmbeddingSpec::source);
    let tau0 = admissible_tau0(&problem.operator, inclusion.map(|i| &i.growth), &spec, cfg.theta)?;
    let admissible = tau0.admits(tau);
    if !admissible {
        if cfg.strict_admissibility {
            return Err(Error::InadmissibleStep {
                slab: k,
                tau,
                tau0: tau0.value,
            });
        }
        warn!("slab {k}: tau = {tau} exceeds the sufficient threshold tau0 = {}", tau0.value);
    }
    if cfg.theta < 0.5 {
        warn!("theta = {} < 1/2 carries no stability guarantee", cfg.theta);
    }
    let slab = Slab::new(cfg, problem, grid, k, u_prev)?;
    let (mut w, mut iterations, mut residual, mut ok) = slab.newton(cfg, u_prev.clone())?;
    let mut picard = false;
    if !ok && cfg.picard_fallback {
        debug!("slab {k}: falling back to Picard iteration");
        let (wp, ip, rp, okp) = slab.picard(cfg, u_prev.clone())?;
        picard = true;
        iterations += ip;
        if okp || rp < residual {
            w = wp;
            residual = rp;
            ok = okp;
        }
    }
    if !ok {
        return Err(Error::NonConvergence { slab: k, residual });
    }
    let (xi, _) = slab.selection(&w)?;
    let clamp_distance = slab.clamp_distance(&w, &xi)?;
    let u = reconstruct(&w, u_prev, cfg.theta)?;
    Ok(StepResult {
        u,
        w,
        xi,
        meta: StepMeta {
            iterations,
            residual,
            clamp_distance,
            epsilon: cfg.epsilon(tau),
            picard,
            admissible,
        },
    })
}

/// `u^k = (w − (1−θ) u^{k−1}) / θ`, coefficientwise.
pub fn reconstruct(w: &DiscreteFunction, u_prev: &DiscreteFunction, theta: f64) -> Result<DiscreteFunction> {
    w.same_space(u_prev)?;
    let coeffs = (&w.coeffs - &u_prev.coeffs * (1.0 - theta)) / theta;
    w.space().function(coeffs)
}

/// Dual norm of the per-step residual recomputed from stored data.
pub fn residual_certificate(
    cfg: &ThetaConfig,
    problem: &Problem,
    grid: &TimeGrid,
    k: usize,
    u_prev: &DiscreteFunction,
    w: &DiscreteFunction,
    xi: &UVector,
) -> Result<f64> {
    let slab = Slab::new(cfg, problem, grid, k, u_prev)?;
    slab.residual_with(w, xi)?.dual_norm()
}

/// `u⁰, …, u^N` with the midpoints, selections and solver metadata.
#[derive(Clone, Debug)]
pub struct TrajectorySolution {
    pub grid: TimeGrid,
    pub theta: f64,
    pub states: Vec<DiscreteFunction>,
    pub mids: Vec<DiscreteFunction>,
    pub selections: Vec<UVector>,
    pub meta: Vec<StepMeta>,
}

impl TrajectorySolution {
    pub fn space(&self) -> &Arc<FemSpace> {
        self.states[0].space()
    }

    /// Membership of every recorded selection in the `ε^k`-enlarged
    /// slab-averaged graph.
    pub fn memberships(&self, problem: &Problem) -> Result<Vec<Membership>> {
        let Some(inc) = &problem.inclusion else {
            return Ok(vec![
                Membership {
                    pass: true,
                    distance: 0.0
                };
                self.mids.len()
            ]);
        };
        (1..=self.grid.count())
            .map(|k| {
                let u = inc.embedding.apply(&self.mids[k - 1])?;
                let m = &self.meta[k - 1];
                inc.graph
                    .slab_average_membership(&self.grid, k, &u, &self.selections[k - 1], m.epsilon)
            })
            .collect()
    }

    /// Residual certificates recomputed from `(u^{k−1}, w^k, ξ^k)`.
    pub fn certificates(&self, cfg: &ThetaConfig, problem: &Problem) -> Result<Vec<f64>> {
        (1..=self.grid.count())
            .map(|k| {
                residual_certificate(
                    cfg,
                    problem,
                    &self.grid,
                    k,
                    &self.states[k - 1],
                    &self.mids[k - 1],
                    &self.selections[k - 1],
                )
            })
            .collect()
    }
}

/// Applies [`step`] on every slab in order.
pub fn solve_trajectory(
    cfg: &ThetaConfig,
    problem: &Problem,
    grid: &TimeGrid,
    u0: &DiscreteFunction,
) -> Result<TrajectorySolution> {
    cfg.check()?;
    let n = grid.count();
    let mut sol = TrajectorySolution {
        grid: grid.clone(),
        theta: cfg.theta,
        states: Vec::with_capacity(n + 1),
        mids: Vec::with_capacity(n),
        selections: Vec::with_capacity(n),
        meta: Vec::with_capacity(n),
    };
    sol.states.push(u0.clone());
    for k in 1..=n {
        let res = step(cfg, problem, grid, k, &sol.states[k - 1]).map_err(|e| match e {
            e @ (Error::NonConvergence { .. } | Error::InadmissibleStep { .. } | Error::AtSlab { .. }) => e,
            e => Error::AtSlab {
                slab: k,
                source: Box::new(e),
            },
        })?;
        sol.states.push(res.u);
        sol.mids.push(res.w);
        sol.selections.push(res.xi);
        sol.meta.push(res.meta);
    }
    Ok(sol)
}
