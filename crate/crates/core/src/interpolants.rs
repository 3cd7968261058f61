//! Time interpolants of a discrete trajectory
//!
//! `ū(t) = w^k` and `η̄(t) = ι*ξ^k` on `(t^{k−1}, t^k]` are piecewise
//! constant, `û` interpolates `u^0, …, u^N` linearly. Also here: slab means
//! of time functions, the trajectory norms and the `BV^q` seminorm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DiscreteFunction, DualVector, Embedding, SpaceExt};
use crate::quadrature::{mapped, GAUSS3, GAUSS5};
use crate::stepper::TrajectorySolution;
use crate::time_grid::TimeGrid;

/// Values a track can carry: a vector space with an `H` inner product.
pub trait TrackValue: Clone + Send + Sync {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self>;
    fn h_inner(&self, other: &Self) -> Result<f64>;
}

impl TrackValue for f64 {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        Ok(a * self + b * other)
    }

    fn h_inner(&self, other: &Self) -> Result<f64> {
        Ok(self * other)
    }
}

impl TrackValue for DiscreteFunction {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.lin_comb(a, other, b)
    }

    fn h_inner(&self, other: &Self) -> Result<f64> {
        DiscreteFunction::h_inner(self, other)
    }
}

fn same_grid(a: &TimeGrid, b: &TimeGrid) -> Result<()> {
    if a.points() == b.points() {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// One value per slab, closed on the right; the value at `t = 0` is the
/// first one.
#[derive(Clone, Debug)]
pub struct PiecewiseConstantTrack<T> {
    grid: TimeGrid,
    values: Vec<T>,
}

impl<T> PiecewiseConstantTrack<T> {
    pub fn new(grid: TimeGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} slabs",
                values.len(),
                grid.count()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `ū(t)`.
    pub fn eval(&self, t: f64) -> Result<&T> {
        Ok(&self.values[self.grid.slab_of(t)? - 1])
    }
}

/// Nodal states `u^0, …, u^N`, affine on each slab.
#[derive(Clone, Debug)]
pub struct PiecewiseLinearTrack<T> {
    grid: TimeGrid,
    states: Vec<T>,
}

impl<T: TrackValue> PiecewiseLinearTrack<T> {
    pub fn new(grid: TimeGrid, states: Vec<T>) -> Result<Self> {
        if states.len() != grid.count() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} states for {} slabs",
                states.len(),
                grid.count()
            )));
        }
        Ok(Self { grid, states })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[T] {
        &self.states
    }

    /// `û(t)`; exact at grid times.
    pub fn eval(&self, t: f64) -> Result<T> {
        let k = self.grid.slab_of(t)?;
        let pts = self.grid.points();
        let lambda = ((t - pts[k - 1]) / (pts[k] - pts[k - 1])).clamp(0.0, 1.0);
        if lambda == 0.0 {
            return Ok(self.states[k - 1].clone());
        }
        if lambda == 1.0 {
            return Ok(self.states[k].clone());
        }
        self.states[k - 1].combine(1.0 - lambda, &self.states[k], lambda)
    }

    /// `û'(t)`: the difference quotient of the slab to the right of a grid
    /// time (to the left at `t = T`).
    pub fn derivative(&self, t: f64) -> Result<T> {
        let mut k = self.grid.slab_of(t)?;
        if k < self.grid.count() && t == self.grid.points()[k] {
            k += 1;
        }
        self.increment(k)?.combine(1.0 / self.grid.tau(k), &self.states[k], 0.0)
    }

    /// `u^k − u^{k−1}`.
    pub fn increment(&self, k: usize) -> Result<T> {
        self.states[k].combine(1.0, &self.states[k - 1], -1.0)
    }
}

/// `ū` of a trajectory.
pub fn bar_track(sol: &TrajectorySolution) -> Result<PiecewiseConstantTrack<DiscreteFunction>> {
    PiecewiseConstantTrack::new(sol.grid.clone(), sol.mids.clone())
}

/// `û` of a trajectory.
pub fn hat_track(sol: &TrajectorySolution) -> Result<PiecewiseLinearTrack<DiscreteFunction>> {
    PiecewiseLinearTrack::new(sol.grid.clone(), sol.states.clone())
}

/// `η̄` of a trajectory.
pub fn eta_track(sol: &TrajectorySolution, embedding: &Embedding) -> Result<PiecewiseConstantTrack<DualVector>> {
    let values = sol
        .selections
        .iter()
        .map(|xi| embedding.adjoint(xi))
        .collect::<Result<Vec<_>>>()?;
    PiecewiseConstantTrack::new(sol.grid.clone(), values)
}

/// Slab means `(1/τ^k) ∫ v dt` by three-point Gauss.
pub fn clement_project<T, F>(v: F, grid: &TimeGrid) -> Result<PiecewiseConstantTrack<T>>
where
    T: TrackValue,
    F: Fn(f64) -> T,
{
    let mut values = Vec::with_capacity(grid.count());
    for k in 1..=grid.count() {
        let (a, b) = grid.slab(k);
        let mut nodes = mapped(&GAUSS3, a, b);
        let (t0, w0) = nodes.next().expect("three nodes");
        let mut acc = v(t0).combine(w0 / (b - a), &v(t0), 0.0)?;
        for (t, w) in nodes {
            acc = acc.combine(1.0, &v(t), w / (b - a))?;
        }
        values.push(acc);
    }
    PiecewiseConstantTrack::new(grid.clone(), values)
}

/// `‖v − track‖_{L²(0,T)}` for scalar tracks, five-point Gauss per slab.
pub fn l2_error_scalar<F: Fn(f64) -> f64>(track: &PiecewiseConstantTrack<f64>, v: F) -> f64 {
    let grid = track.grid();
    (1..=grid.count())
        .map(|k| {
            let (a, b) = grid.slab(k);
            let c = track.values()[k - 1];
            mapped(&GAUSS5, a, b).map(|(t, w)| w * (v(t) - c).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `(Σ τ^k ‖w^k‖^p)^{1/p}`.
pub fn norm_lp_v(bar: &PiecewiseConstantTrack<DiscreteFunction>) -> f64 {
    let Some(first) = bar.values().first() else {
        return 0.0;
    };
    let p = first.space().p();
    bar.values()
        .iter()
        .zip(bar.grid().taus())
        .map(|(w, tau)| tau * w.v_norm_pow())
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `max_k ‖u^k‖_H`.
pub fn norm_linf_h(hat: &PiecewiseLinearTrack<DiscreteFunction>) -> f64 {
    hat.states().iter().map(DiscreteFunction::h_norm).fold(0.0, f64::max)
}

/// `(Σ τ^k ‖M (u^k − u^{k−1}) / τ^k‖_*^q)^{1/q}`: the derivative pairs with
/// `V` through the `H` inner product.
pub fn norm_lq_vstar_dt(hat: &PiecewiseLinearTrack<DiscreteFunction>) -> Result<f64> {
    let space = hat.states()[0].space();
    let q = space.q();
    let mut sum = 0.0;
    for k in 1..=hat.grid().count() {
        let tau = hat.grid().tau(k);
        let d = space.mass_apply(&hat.increment(k)?)?.dual_norm()? / tau;
        sum += tau * d.powf(q);
    }
    Ok(sum.powf(1.0 / q))
}

/// `‖M(a − b)‖_*`, the `V*` distance of two `H`-elements.
pub fn vstar_distance(a: &DiscreteFunction, b: &DiscreteFunction) -> Result<f64> {
    a.space().mass_apply(&a.sub(b)?)?.dual_norm()
}

/// Supremum over partitions of `Σ ‖x(b_i) − x(a_i)‖^q` for the
/// slabwise-constant sequence `values`, by dynamic programming over
/// increasing index chains. The chain may always be taken to start at the
/// first and end at the last value.
pub fn bvq_seminorm<T, D>(values: &[T], q: f64, dist: D) -> Result<f64>
where
    T: Sync,
    D: Fn(&T, &T) -> Result<f64> + Sync,
{
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("q must be at least 1, got {q}")));
    }
    let n = values.len();
    if n < 2 {
        return Ok(0.0);
    }
    // rows[j][i] = ‖x_j − x_i‖^q for i < j
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..j)
                .map(|i| dist(&values[j], &values[i]).map(|d| d.powf(q)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut best = vec![0.0_f64; n];
    for j in 1..n {
        best[j] = (0..j).map(|i| best[i] + rows[j][i]).fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(best[n - 1])
}

/// Both sides of `(û', û − ū)_{L²(0,T;H)} = −((2θ−1)/2) Σ ‖u^k − u^{k−1}‖²_H`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbbIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// The left side is integrated exactly slab by slab: with `Δ = u^k − u^{k−1}`,
/// `∫ (Δ/τ, u^{k−1} − w^k + Δ s/τ) ds = (Δ, u^{k−1} − w^k) + ‖Δ‖²/2`.
pub fn bbb_identity<T: TrackValue>(
    hat: &PiecewiseLinearTrack<T>,
    bar: &PiecewiseConstantTrack<T>,
    theta: f64,
) -> Result<BbbIdentity> {
    same_grid(hat.grid(), bar.grid())?;
    let mut lhs = 0.0;
    let mut incr = 0.0;
    for k in 1..=hat.grid().count() {
        let d = hat.increment(k)?;
        let gap = hat.states()[k - 1].combine(1.0, &bar.values()[k - 1], -1.0)?;
        let dd = d.h_inner(&d)?;
        lhs += d.h_inner(&gap)? + 0.5 * dd;
        incr += dd;
    }
    let rhs = -(2.0 * theta - 1.0) / 2.0 * incr;
    Ok(BbbIdentity {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// The `ū` track of a scalar trajectory, `w^k = θu^k + (1−θ)u^{k−1}`.
pub fn theta_mids<T: TrackValue>(hat: &PiecewiseLinearTrack<T>, theta: f64) -> Result<PiecewiseConstantTrack<T>> {
    let values = (1..=hat.grid().count())
        .map(|k| hat.states()[k].combine(theta, &hat.states()[k - 1], 1.0 - theta))
        .collect::<Result<Vec<_>>>()?;
    PiecewiseConstantTrack::new(hat.grid().clone(), values)
}

/// Per-slab `(∫ ‖M(û − ū)‖_*^q dt, (τ^k)^q/(q+1) · τ^k ‖M Δ/τ^k‖_*^q)`,
/// using `û − ū = (s/τ − θ) Δ` on each slab.
pub fn hat_bar_gap(hat: &PiecewiseLinearTrack<DiscreteFunction>, theta: f64) -> Result<Vec<(f64, f64)>> {
    let space = hat.states()[0].space();
    let q = space.q();
    (1..=hat.grid().count())
        .map(|k| {
            let tau = hat.grid().tau(k);
            let d = space.mass_apply(&hat.increment(k)?)?.dual_norm()?;
            let value = d.powf(q) * tau * (theta.powf(q + 1.0) + (1.0 - theta).powf(q + 1.0)) / (q + 1.0);
            let bound = tau.powf(q) / (q + 1.0) * tau * (d / tau).powf(q);
            Ok((value, bound))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{BoundaryCondition, FemSpace, SpatialMesh};
    use proptest::prelude::*;

    fn scalar_hat(states: Vec<f64>, taus: Vec<f64>) -> PiecewiseLinearTrack<f64> {
        let horizon = taus.iter().sum();
        PiecewiseLinearTrack::new(TimeGrid::from_taus(horizon, taus).unwrap(), states).unwrap()
    }

    fn abs_dist(a: &f64, b: &f64) -> Result<f64> {
        Ok((a - b).abs())
    }

    #[test]
    fn eval_examples() {
        let hat = scalar_hat(vec![0.0, 1.0, 3.0], vec![0.3, 0.7]);
        assert_eq!(hat.eval(0.15).unwrap(), 0.5);
        assert_eq!(hat.eval(0.3).unwrap(), 1.0);
        assert_eq!(hat.eval(1.0).unwrap(), 3.0);
        assert_eq!(hat.derivative(0.3).unwrap(), 2.0 / 0.7);
        assert_eq!(hat.derivative(0.0).unwrap(), 1.0 / 0.3);
        assert_eq!(hat.derivative(1.0).unwrap(), 2.0 / 0.7);
        assert!(hat.eval(1.5).is_err());
        let bar = theta_mids(&hat, 0.5).unwrap();
        assert_eq!(*bar.eval(0.0).unwrap(), 0.5);
        assert_eq!(*bar.eval(0.3).unwrap(), 0.5);
        assert_eq!(*bar.eval(0.31).unwrap(), 2.0);
    }

    #[test]
    fn clement_examples() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let c = clement_project(|_| 2.5, &grid).unwrap();
        assert!(c.values().iter().all(|&v| (v - 2.5).abs() < 1e-15));
        for n in [4, 8, 16] {
            let grid = TimeGrid::uniform(1.0, n).unwrap();
            let c = clement_project(|t| t, &grid).unwrap();
            let tau = 1.0 / n as f64;
            for (k, v) in c.values().iter().enumerate() {
                assert!((v - (k as f64 + 0.5) * tau).abs() < 1e-15);
            }
            let err = l2_error_scalar(&c, |t| t);
            assert!((err - tau / (2.0 * 3f64.sqrt())).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_examples() {
        let space = FemSpace::new(SpatialMesh::uniform(1.0, 2, BoundaryCondition::Dirichlet).unwrap(), 2.0).unwrap();
        let grid = TimeGrid::uniform(0.5, 1).unwrap();
        // hat with peak 1 has ‖u'‖ = 2
        let w = space.function(nalgebra::DVector::from_element(1, 1.0)).unwrap();
        let bar = PiecewiseConstantTrack::new(grid.clone(), vec![w.clone()]).unwrap();
        assert!((norm_lp_v(&bar) - 2f64.sqrt()).abs() < 1e-14);
        let still = PiecewiseLinearTrack::new(grid.clone(), vec![w.clone(), w.clone()]).unwrap();
        assert_eq!(norm_lq_vstar_dt(&still).unwrap(), 0.0);
        let zero = PiecewiseLinearTrack::new(grid, vec![space.zero(), space.zero()]).unwrap();
        assert_eq!(norm_linf_h(&zero), 0.0);
        assert_eq!(norm_lq_vstar_dt(&zero).unwrap(), 0.0);
    }

    #[test]
    fn bvq_examples() {
        assert_eq!(bvq_seminorm(&[0.0, 1.0, 3.0], 2.0, abs_dist).unwrap(), 9.0);
        assert_eq!(bvq_seminorm(&[0.0, 1.0, 0.0], 2.0, abs_dist).unwrap(), 2.0);
        assert_eq!(bvq_seminorm(&[4.0; 5], 1.5, abs_dist).unwrap(), 0.0);
        assert!(bvq_seminorm(&[0.0, 1.0], 0.5, abs_dist).is_err());
    }

    #[test]
    fn bbb_examples() {
        let hat = scalar_hat(vec![0.0, 1.0, 3.0], vec![1.0, 1.0]);
        let bar = theta_mids(&hat, 1.0).unwrap();
        let id = bbb_identity(&hat, &bar, 1.0).unwrap();
        assert_eq!(id.rhs, -2.5);
        assert!(id.residual <= 1e-12);
        let bar = theta_mids(&hat, 0.5).unwrap();
        let id = bbb_identity(&hat, &bar, 0.5).unwrap();
        assert_eq!(id.rhs, 0.0);
        assert!(id.lhs.abs() <= 1e-12);
        let flat = scalar_hat(vec![2.0; 4], vec![0.2, 0.3, 0.5]);
        let id = bbb_identity(&flat, &theta_mids(&flat, 0.8).unwrap(), 0.8).unwrap();
        assert_eq!((id.lhs, id.rhs), (0.0, 0.0));
    }

    #[test]
    fn gap_bound_holds() {
        let space = FemSpace::new(SpatialMesh::uniform(1.0, 6, BoundaryCondition::Dirichlet).unwrap(), 3.0).unwrap();
        let grid = TimeGrid::random_regular(1.0, 5, 2.0, 3).unwrap();
        let states = (0..6)
            .map(|k| space.interpolate(|x| (x * (k as f64 + 1.0)).sin() * x * (1.0 - x)))
            .collect();
        let hat = PiecewiseLinearTrack::new(grid, states).unwrap();
        for theta in [0.5, 0.8, 1.0] {
            for (v, b) in hat_bar_gap(&hat, theta).unwrap() {
                assert!(v <= b * (1.0 + 1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn bvq_monotone_under_extension(values in proptest::collection::vec(-5.0..5.0f64, 1..10), extra in -5.0..5.0f64, q in 1.0..3.0f64) {
            let base = bvq_seminorm(&values, q, abs_dist).unwrap();
            let mut longer = values.clone();
            longer.push(extra);
            prop_assert!(bvq_seminorm(&longer, q, abs_dist).unwrap() >= base);
        }

        #[test]
        fn clement_of_slabwise_constant_is_identity(values in proptest::collection::vec(-5.0..5.0f64, 1..8)) {
            let grid = TimeGrid::uniform(1.0, values.len()).unwrap();
            let track = PiecewiseConstantTrack::new(grid.clone(), values.clone()).unwrap();
            let proj = clement_project(|t| *track.eval(t).unwrap(), &grid).unwrap();
            for (a, b) in proj.values().iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn bbb_holds_for_random_scalar_tracks(
            states in proptest::collection::vec(-5.0..5.0f64, 2..20),
            theta in 0.5..=1.0f64,
        ) {
            let n = states.len() - 1;
            let hat = scalar_hat(states, vec![1.0 / n as f64; n]);
            let id = bbb_identity(&hat, &theta_mids(&hat, theta).unwrap(), theta).unwrap();
            prop_assert!(id.residual <= 1e-12 * (1.0 + id.rhs.abs()));
        }
    }
}
