//! A priori quantities, identities and convergence descriptors evaluated
//! on computed trajectories.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DiscreteFunction, FemSpace, SpaceExt};
use crate::interpolants::{PiecewiseConstantTrack, PiecewiseLinearTrack};
use crate::multifunction::GrowthParams;
use crate::operators::TimeProfile;
use crate::quadrature::{mapped, GAUSS3, GAUSS5};
use crate::stepper::{Problem, TrajectorySolution};

/// Stability quantities of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    /// `max_k ‖u^k‖²_H`.
    pub max_h2: f64,
    /// `Σ τ^k ‖w^k‖^p`.
    pub sum_vp: f64,
    /// `(2θ − 1) Σ ‖u^k − u^{k−1}‖²_H`.
    pub increment_sum: f64,
    /// Sum of the three terms above.
    pub lhs_lemma42: f64,
    /// `Σ τ^k ‖A^k w^k‖_*^q`.
    pub sum_ak: f64,
    /// `Σ τ^k ‖ι*ξ^k‖_*^q`.
    pub sum_xi: f64,
    /// `Σ τ^k ‖M (u^k − u^{k−1}) / τ^k‖_*^q`.
    pub sum_der: f64,
    /// `M̂ = 1 + ‖u₀‖²_H + Σ τ^k ‖f^k‖_*^q + ‖g‖_{L¹}`, a data-only reference
    /// scale with unit constant.
    pub data_constant: f64,
}

pub fn apriori(sol: &TrajectorySolution, problem: &Problem) -> Result<AprioriReport> {
    let space = &problem.space;
    let q = space.q();
    let grid = &sol.grid;
    let theta = sol.theta;
    let max_h2 = sol.states.iter().map(|u| u.h_norm().powi(2)).fold(0.0, f64::max);
    let mut sum_vp = 0.0;
    let mut incr = 0.0;
    let mut sum_ak = 0.0;
    let mut sum_xi = 0.0;
    let mut sum_der = 0.0;
    let mut sum_f = 0.0;
    for k in 1..=grid.count() {
        let tau = grid.tau(k);
        let w = &sol.mids[k - 1];
        let d = sol.states[k].sub(&sol.states[k - 1])?;
        sum_vp += tau * w.v_norm_pow();
        incr += d.h_norm().powi(2);
        sum_ak += tau * problem.operator.slab_average(grid, k, w)?.dual_norm()?.powf(q);
        if let Some(inc) = &problem.inclusion {
            sum_xi += tau * inc.embedding.adjoint(&sol.selections[k - 1])?.dual_norm()?.powf(q);
        }
        sum_der += tau * (space.mass_apply(&d)?.dual_norm()? / tau).powf(q);
        sum_f += tau * problem.source.slab_average(space, grid, k)?.dual_norm()?.powf(q);
    }
    let increment_sum = (2.0 * theta - 1.0) * incr;
    let g_l1 = match problem.inclusion.as_ref().map(|i| &i.growth) {
        Some(GrowthParams::B { g, .. }) => abs_integral(g, grid.horizon()),
        _ => 0.0,
    };
    Ok(AprioriReport {
        max_h2,
        sum_vp,
        increment_sum,
        lhs_lemma42: max_h2 + sum_vp + increment_sum,
        sum_ak,
        sum_xi,
        sum_der,
        data_constant: 1.0 + sol.states[0].h_norm().powi(2) + sum_f + g_l1,
    })
}

fn abs_integral(g: &TimeProfile, horizon: f64) -> f64 {
    let n = 256;
    (0..n)
        .map(|i| {
            let a = horizon * i as f64 / n as f64;
            let b = horizon * (i + 1) as f64 / n as f64;
            mapped(&GAUSS5, a, b).map(|(t, w)| w * g.eval(t).abs()).sum::<f64>()
        })
        .sum()
}

/// `|(a−b)(θa+(1−θ)b) − ½(a²−b²+(2θ−1)(a−b)²)|`.
pub fn algebraic_identity_check(a: f64, b: f64, theta: f64) -> f64 {
    let lhs = (a - b) * (theta * a + (1.0 - theta) * b);
    let rhs = 0.5 * (a * a - b * b + (2.0 * theta - 1.0) * (a - b) * (a - b));
    (lhs - rhs).abs()
}

/// Least-squares line through `(log τ_max, log error)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the fit residuals in log space.
    pub residual: f64,
}

pub fn observed_order(errors: &[f64], tau_maxes: &[f64]) -> Result<OrderFit> {
    if errors.len() != tau_maxes.len() {
        return Err(Error::InvalidArgument("errors and step sizes differ in length".into()));
    }
    if errors.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "an order needs at least 3 grids, got {}",
            errors.len()
        )));
    }
    if errors.iter().chain(tau_maxes).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("errors and step sizes must be positive".into()));
    }
    let xs: Vec<f64> = tau_maxes.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("step sizes must not all coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit {
        slope,
        intercept,
        residual,
    })
}

/// Something that can be evaluated as an element of `V_h` at any time.
pub trait Reference: Send + Sync {
    fn at(&self, t: f64) -> Result<DiscreteFunction>;
}

impl Reference for PiecewiseLinearTrack<DiscreteFunction> {
    fn at(&self, t: f64) -> Result<DiscreteFunction> {
        self.eval(t)
    }
}

/// The `L²` projection of a closed-form solution `u(t, x)`.
#[derive(Clone)]
pub struct ExactReference {
    space: Arc<FemSpace>,
    u: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl ExactReference {
    pub fn new<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(space: Arc<FemSpace>, u: F) -> Self {
        Self { space, u: Arc::new(u) }
    }
}

impl Reference for ExactReference {
    fn at(&self, t: f64) -> Result<DiscreteFunction> {
        Ok(self.space.l2_project(|x| (self.u)(t, x)))
    }
}

/// `max_{t ∈ times} ‖û(t) − u_ref(t)‖_H`.
pub fn pointwise_h_error(
    hat: &PiecewiseLinearTrack<DiscreteFunction>,
    reference: &dyn Reference,
    times: &[f64],
) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &t in times {
        worst = worst.max(hat.eval(t)?.sub(&reference.at(t)?)?.h_norm());
    }
    Ok(worst)
}

/// Grid times `t^k ≥ offset`.
pub fn grid_times_from(hat: &PiecewiseLinearTrack<DiscreteFunction>, offset: f64) -> Vec<f64> {
    hat.grid().points().iter().copied().filter(|&t| t >= offset).collect()
}

/// `‖û − u_ref‖_{L²(0,T;H)}`, three-point Gauss per slab.
pub fn l2_h_error(hat: &PiecewiseLinearTrack<DiscreteFunction>, reference: &dyn Reference) -> Result<f64> {
    let grid = hat.grid();
    let mut sum = 0.0;
    for k in 1..=grid.count() {
        let (a, b) = grid.slab(k);
        for (t, w) in mapped(&GAUSS3, a, b) {
            sum += w * hat.eval(t)?.sub(&reference.at(t)?)?.h_norm().powi(2);
        }
    }
    Ok(sum.sqrt())
}

/// `‖ū − u_ref‖_{L^p(0,T;V)}`, three-point Gauss per slab.
pub fn lp_v_error(bar: &PiecewiseConstantTrack<DiscreteFunction>, reference: &dyn Reference) -> Result<f64> {
    let grid = bar.grid();
    let Some(first) = bar.values().first() else {
        return Ok(0.0);
    };
    let p = first.space().p();
    let mut sum = 0.0;
    for k in 1..=grid.count() {
        let (a, b) = grid.slab(k);
        for (t, w) in mapped(&GAUSS3, a, b) {
            sum += w * bar.values()[k - 1].sub(&reference.at(t)?)?.v_norm_pow();
        }
    }
    Ok(sum.powf(1.0 / p))
}

/// `max / min` over a family; `1` when every value is zero.
pub fn uniformity_ratio(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max == 0.0 {
        1.0
    } else if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `‖u_{0n}‖_V · (τ^max_n)^{1/p}` for each member of a family.
pub fn initial_datum_growth(u0s: &[DiscreteFunction], tau_maxes: &[f64]) -> Vec<f64> {
    u0s.iter()
        .zip(tau_maxes)
        .map(|(u, t)| u.v_norm() * t.powf(1.0 / u.space().p()))
        .collect()
}
