//! Variable time grids `0 = t^0 < t^1 < ... < t^N = T`, their regularity
//! constants, and slab lookup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for comparisons against the horizon.
pub const HORIZON_RTOL: f64 = 1e-12;

/// A partition of `[0, T]`. Immutable once built.
///
/// Grid times are running sums of the slab lengths, so `points[k] -
/// points[k - 1]` reproduces `taus[k - 1]` up to a single rounding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    taus: Vec<f64>,
    horizon: f64,
}

impl TimeGrid {
    /// `n` equal slabs of length `horizon / n`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        check_horizon(horizon)?;
        if n == 0 {
            return Err(Error::InvalidGrid("slab count must be at least 1".into()));
        }
        Self::from_taus(horizon, vec![horizon / n as f64; n])
    }

    /// `n` slabs whose raw weights are drawn uniformly from `[1, k_target)`
    /// and then normalized to sum to `horizon`, so `tau_max / tau_min` stays
    /// below `k_target` by construction.
    pub fn random_regular(horizon: f64, n: usize, k_target: f64, seed: u64) -> Result<Self> {
        check_horizon(horizon)?;
        if n == 0 {
            return Err(Error::InvalidGrid("slab count must be at least 1".into()));
        }
        if !(k_target >= 1.0) || !k_target.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "regularity target must be finite and >= 1, got {k_target}"
            )));
        }
        if k_target == 1.0 {
            return Self::uniform(horizon, n);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..k_target)).collect();
        let total: f64 = raw.iter().sum();
        Self::from_taus(horizon, raw.iter().map(|w| horizon * w / total).collect())
    }

    /// Builds a grid from explicit points; `points[0]` must be 0.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid("first point must be 0".into()));
        }
        let taus = points.windows(2).map(|w| w[1] - w[0]).collect();
        Self::from_taus(*points.last().unwrap(), taus)
    }

    /// Builds a grid from slab lengths that must sum to `horizon`.
    pub fn from_taus(horizon: f64, taus: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if taus.is_empty() {
            return Err(Error::InvalidGrid("slab count must be at least 1".into()));
        }
        if let Some(k) = taus.iter().position(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "slab {} has non-positive length {}",
                k + 1,
                taus[k]
            )));
        }
        let mut points = Vec::with_capacity(taus.len() + 1);
        let mut acc = 0.0;
        points.push(acc);
        for t in &taus {
            acc += t;
            points.push(acc);
        }
        if (acc - horizon).abs() > HORIZON_RTOL * horizon {
            return Err(Error::InvalidGrid(format!(
                "slab lengths sum to {acc}, expected {horizon}"
            )));
        }
        Ok(Self { points, taus, horizon })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Slab lengths; `taus()[k - 1]` is the length of slab `k`.
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// Length of slab `k` (1-based).
    pub fn tau(&self, k: usize) -> f64 {
        self.taus[k - 1]
    }

    /// Endpoints `(t^{k-1}, t^k)` of slab `k` (1-based).
    pub fn slab(&self, k: usize) -> (f64, f64) {
        (self.points[k - 1], self.points[k])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn count(&self) -> usize {
        self.taus.len()
    }

    pub fn tau_max(&self) -> f64 {
        self.taus.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn tau_min(&self) -> f64 {
        self.taus.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn regularity(&self) -> GridRegularity {
        let tau_max = self.tau_max();
        let tau_min = self.tau_min();
        let r_ratios: Vec<f64> = self.taus.windows(2).map(|w| w[1] / w[0]).collect();
        let r_max = if r_ratios.is_empty() {
            1.0
        } else {
            r_ratios.iter().copied().fold(f64::MIN, f64::max)
        };
        GridRegularity {
            tau_max,
            tau_min,
            k_observed: tau_max / tau_min,
            r_ratios,
            r_max,
        }
    }

    /// Checks `r_max < (theta / (1 - theta))^p`; any grid passes for `theta = 1`.
    pub fn validate_ratio_condition(&self, theta: f64, p: f64) -> Result<RatioCheck> {
        if !(0.5..=1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "ratio condition is stated for theta in [1/2, 1], got {theta}"
            )));
        }
        if !(p > 1.0) {
            return Err(Error::InvalidArgument(format!("exponent p must exceed 1, got {p}")));
        }
        let r_max = self.regularity().r_max;
        let bound = if theta == 1.0 {
            f64::INFINITY
        } else {
            (theta / (1.0 - theta)).powf(p)
        };
        Ok(RatioCheck {
            pass: r_max < bound,
            bound,
            r_max,
            margin: bound - r_max,
        })
    }

    /// Index `k` of the slab `(t^{k-1}, t^k]` containing `t`; `t = 0` maps to 1.
    pub fn slab_of(&self, t: f64) -> Result<usize> {
        let tol = HORIZON_RTOL * self.horizon;
        if !(t >= 0.0) || t > self.horizon + tol {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        if t == 0.0 {
            return Ok(1);
        }
        // first k with points[k] >= t
        let k = self.points.partition_point(|&p| p < t);
        Ok(k.clamp(1, self.count()))
    }

    /// Independent grids for each `n` in `counts`. Random members are redrawn
    /// with successive seeds until `tau_max` strictly decreases along the
    /// family.
    pub fn family(horizon: f64, spec: &GridKind, counts: &[usize]) -> Result<Vec<TimeGrid>> {
        let mut out: Vec<TimeGrid> = Vec::with_capacity(counts.len());
        for (level, &n) in counts.iter().enumerate() {
            let grid = match *spec {
                GridKind::Uniform => TimeGrid::uniform(horizon, n)?,
                GridKind::RandomRegular { k_target, seed } => {
                    let mut attempt = 0u64;
                    loop {
                        let s = seed
                            .wrapping_add(1000 * level as u64)
                            .wrapping_add(attempt);
                        let g = TimeGrid::random_regular(horizon, n, k_target, s)?;
                        let ok = out.last().map_or(true, |prev| g.tau_max() < prev.tau_max());
                        if ok {
                            break g;
                        }
                        attempt += 1;
                        if attempt > 256 {
                            return Err(Error::InvalidGrid(format!(
                                "could not draw a grid with N = {n} refining the previous member"
                            )));
                        }
                    }
                }
            };
            out.push(grid);
        }
        Ok(out)
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// Regularity constants of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRegularity {
    pub tau_max: f64,
    pub tau_min: f64,
    pub k_observed: f64,
    /// `tau^k / tau^{k-1}` for `k >= 2`.
    pub r_ratios: Vec<f64>,
    /// 1 for single-slab grids.
    pub r_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub pass: bool,
    pub bound: f64,
    pub r_max: f64,
    pub margin: f64,
}

/// How grid members are generated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridKind {
    Uniform,
    RandomRegular { k_target: f64, seed: u64 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_examples() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.regularity().k_observed, 1.0);

        let g = TimeGrid::uniform(2.0, 1).unwrap();
        assert_eq!(g.points(), &[0.0, 2.0]);
        assert_eq!(g.tau(1), 2.0);

        let g = TimeGrid::uniform(1.0, 10).unwrap();
        assert_eq!(g.tau_max(), 0.1);
        assert_eq!(g.tau_min(), 0.1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TimeGrid::uniform(0.0, 4).is_err());
        assert!(TimeGrid::uniform(-1.0, 4).is_err());
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::random_regular(1.0, 4, 0.5, 0).is_err());
        assert!(TimeGrid::from_points(&[0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_points(&[0.1, 0.5]).is_err());
    }

    #[test]
    fn random_regular_examples() {
        let g = TimeGrid::random_regular(1.0, 8, 2.0, 7).unwrap();
        assert_eq!(g.count(), 8);
        assert!(g.tau_max() / g.tau_min() <= 2.0);

        let g = TimeGrid::random_regular(1.0, 8, 1.0, 7).unwrap();
        assert_eq!(g, TimeGrid::uniform(1.0, 8).unwrap());

        let g = TimeGrid::random_regular(1.0, 2, 3.0, 0).unwrap();
        assert_eq!(g.count(), 2);
        assert!(g.tau_max() / g.tau_min() <= 3.0);
        assert!((g.taus()[0] + g.taus()[1] - 1.0).abs() < 1e-15);

        // deterministic for a fixed seed
        assert_eq!(
            TimeGrid::random_regular(1.0, 16, 2.0, 3).unwrap(),
            TimeGrid::random_regular(1.0, 16, 2.0, 3).unwrap()
        );
    }

    #[test]
    fn regularity_examples() {
        let r = TimeGrid::uniform(1.0, 4).unwrap().regularity();
        assert_eq!(r.k_observed, 1.0);
        assert_eq!(r.r_max, 1.0);

        let r = TimeGrid::from_points(&[0.0, 0.1, 0.4, 0.5]).unwrap().regularity();
        assert!((r.tau_max - 0.3).abs() < 1e-15);
        assert!((r.k_observed - 3.0).abs() < 1e-12);
        assert_eq!(r.r_ratios.len(), 2);
        assert!((r.r_ratios[0] - 3.0).abs() < 1e-12);
        assert!((r.r_ratios[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.r_max - 3.0).abs() < 1e-12);

        let r = TimeGrid::uniform(2.0, 1).unwrap().regularity();
        assert!(r.r_ratios.is_empty());
        assert_eq!(r.r_max, 1.0);
    }

    #[test]
    fn ratio_condition_examples() {
        let u = TimeGrid::uniform(1.0, 4).unwrap();
        let c = u.validate_ratio_condition(0.5, 2.0).unwrap();
        assert_eq!(c.bound, 1.0);
        assert!(!c.pass);
        assert!(u.validate_ratio_condition(1.0, 2.0).unwrap().pass);

        let g = TimeGrid::from_points(&[0.0, 0.1, 0.4, 0.5]).unwrap();
        let c = g.validate_ratio_condition(0.75, 2.0).unwrap();
        assert!((c.bound - 9.0).abs() < 1e-12);
        assert!(c.pass);

        assert!(u.validate_ratio_condition(0.4, 2.0).is_err());
        assert!(u.validate_ratio_condition(1.1, 2.0).is_err());
    }

    #[test]
    fn slab_of_examples() {
        let g = TimeGrid::from_points(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(g.slab_of(0.5).unwrap(), 1);
        assert_eq!(g.slab_of(0.6).unwrap(), 2);
        assert_eq!(g.slab_of(0.0).unwrap(), 1);
        assert_eq!(g.slab_of(1.0).unwrap(), 2);
        assert!(g.slab_of(-0.1).is_err());
        assert!(g.slab_of(1.1).is_err());
    }

    #[test]
    fn family_refines_monotonically() {
        let counts = [4, 8, 16, 32, 64, 128];
        let fam = TimeGrid::family(1.0, &GridKind::RandomRegular { k_target: 2.0, seed: 11 }, &counts).unwrap();
        for w in fam.windows(2) {
            assert!(w[1].tau_max() < w[0].tau_max());
        }
        for g in &fam {
            assert!(g.regularity().k_observed <= 2.0);
        }
    }

    proptest! {
        #[test]
        fn generated_grids_sum_to_horizon(
            horizon in 0.1f64..10.0,
            n in 1usize..200,
            k in 1.0f64..8.0,
            seed in any::<u64>(),
        ) {
            let g = TimeGrid::random_regular(horizon, n, k, seed).unwrap();
            let sum: f64 = g.taus().iter().sum();
            prop_assert!((sum - horizon).abs() <= 1e-12 * horizon);
            prop_assert!(g.regularity().k_observed <= k);
            prop_assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn slab_of_inverts_membership(n in 1usize..50, seed in any::<u64>(), frac in 0.0f64..1.0) {
            let g = TimeGrid::random_regular(1.0, n, 3.0, seed).unwrap();
            for k in 1..=n {
                let (a, b) = g.slab(k);
                let t = a + (b - a) * frac;
                if t > a {
                    prop_assert_eq!(g.slab_of(t).unwrap(), k);
                }
                prop_assert_eq!(g.slab_of(b).unwrap(), k);
            }
        }
    }
}
