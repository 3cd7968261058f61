//! Multivalued terms obtained by filling in the jumps of a scalar function
//!
//! A [`FilledGraph`] is `F(t, s) = m(t) · [min(f̄(s−), f̄(s+)), max(f̄(s−), f̄(s+))]`
//! where `f̄ = branch + Σ_j h_j H(· − s_j)` and the branch is continuous and
//! nondecreasing. It acts pointwise on `U`-vectors (Gauss points in source
//! mode, endpoint traces in boundary mode).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Embedding, UVector};
use crate::operators::{HypothesisReport, Margin, TimeProfile};
use crate::time_grid::TimeGrid;

/// Vertical slack of the membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Continuous nondecreasing part of `f̄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Zero,
    Identity,
    /// `s³ / (1 + s²)`.
    CubicRational,
}

impl Branch {
    pub fn eval(self, s: f64) -> f64 {
        match self {
            Branch::Zero => 0.0,
            Branch::Identity => s,
            Branch::CubicRational => s * s * s / (1.0 + s * s),
        }
    }

    pub fn slope(self, s: f64) -> f64 {
        match self {
            Branch::Zero => 0.0,
            Branch::Identity => 1.0,
            Branch::CubicRational => {
                let d = 1.0 + s * s;
                s * s * (3.0 + s * s) / (d * d)
            }
        }
    }
}

/// Registered time modulations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "const")]
    Const,
    #[serde(rename = "t")]
    Linear,
    #[serde(rename = "1+cos")]
    OnePlusCos,
}

impl Modulation {
    pub fn profile(self) -> TimeProfile {
        match self {
            Modulation::Const => TimeProfile::constant(1.0),
            Modulation::Linear => TimeProfile::affine(0.0, 1.0),
            Modulation::OnePlusCos => TimeProfile::Cos {
                c0: 1.0,
                c1: 1.0,
                omega: 2.0 * std::f64::consts::PI,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilledGraph {
    branch: Branch,
    /// `(position, signed height)`, strictly increasing in position.
    jumps: Vec<(f64, f64)>,
    modulation: TimeProfile,
}

impl FilledGraph {
    pub fn new(branch: Branch, mut jumps: Vec<(f64, f64)>, modulation: TimeProfile) -> Result<Self> {
        if jumps.iter().any(|(s, h)| !s.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidArgument("jump data must be finite".into()));
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        if jumps.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("jump positions must be distinct".into()));
        }
        Ok(Self {
            branch,
            jumps,
            modulation,
        })
    }

    /// `f̄ = height · H(s − s_j)` summed over the jumps.
    pub fn heaviside(jumps: &[f64], height: f64) -> Result<Self> {
        Self::new(
            Branch::Zero,
            jumps.iter().map(|&s| (s, height)).collect(),
            TimeProfile::constant(1.0),
        )
    }

    /// `f̄(s) = s − drop · #{s_j < s}`.
    pub fn sawtooth(jumps: &[f64], drop: f64) -> Result<Self> {
        Self::new(
            Branch::Identity,
            jumps.iter().map(|&s| (s, -drop)).collect(),
            TimeProfile::constant(1.0),
        )
    }

    /// `f̄(s) = s³/(1 + s²) + height · #{s_j < s}`.
    pub fn cubic_jump(jumps: &[f64], height: f64) -> Result<Self> {
        Self::new(
            Branch::CubicRational,
            jumps.iter().map(|&s| (s, height)).collect(),
            TimeProfile::constant(1.0),
        )
    }

    pub fn with_modulation(mut self, modulation: TimeProfile) -> Self {
        self.modulation = modulation;
        self
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn modulation(&self) -> &TimeProfile {
        &self.modulation
    }

    /// Fails when the modulation takes negative values on `[0, horizon]`.
    pub fn check(&self, horizon: f64) -> Result<()> {
        let (lo, _) = self.modulation.bounds(horizon);
        if lo < 0.0 {
            return Err(Error::InvalidArgument(format!("modulation reaches {lo} < 0")));
        }
        Ok(())
    }

    /// Smallest distance between consecutive jumps (`∞` with fewer than two).
    pub fn min_gap(&self) -> f64 {
        self.jumps
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .fold(f64::INFINITY, f64::min)
    }

    /// `f̄(s−)`.
    pub fn left_limit(&self, s: f64) -> f64 {
        self.branch.eval(s) + self.jumps.iter().take_while(|j| j.0 < s).map(|j| j.1).sum::<f64>()
    }

    /// `f̄(s+)`.
    pub fn right_limit(&self, s: f64) -> f64 {
        self.branch.eval(s) + self.jumps.iter().take_while(|j| j.0 <= s).map(|j| j.1).sum::<f64>()
    }

    /// The filled value of `f̄` at `s`, without modulation.
    pub fn base_interval(&self, s: f64) -> (f64, f64) {
        let (a, b) = (self.left_limit(s), self.right_limit(s));
        (a.min(b), a.max(b))
    }

    /// `F(t, s)`.
    pub fn interval_at(&self, t: f64, s: f64) -> (f64, f64) {
        let m = self.modulation.eval(t);
        let (lo, hi) = self.base_interval(s);
        (m * lo, m * hi)
    }

    /// Convex hull of the filled graph of `f̄` over `[a, b]`.
    pub fn hull(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut push = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        push(self.left_limit(a));
        push(self.right_limit(a));
        push(self.left_limit(b));
        push(self.right_limit(b));
        for &(s, _) in self.jumps.iter().filter(|j| j.0 > a && j.0 < b) {
            push(self.left_limit(s));
            push(self.right_limit(s));
        }
        (lo, hi)
    }

    /// `(1/τ^k) ∫_{slab k} m(t) dt`.
    pub fn slab_modulation(&self, grid: &TimeGrid, k: usize) -> Result<f64> {
        if k == 0 || k > grid.count() {
            return Err(Error::InvalidArgument(format!("slab {k} outside 1..={}", grid.count())));
        }
        let (a, b) = grid.slab(k);
        Ok(self.modulation.integral(a, b) / (b - a))
    }

    /// Checks `ξ_i ∈ m̄^k · hull(f̄, [u_i − tol, u_i + tol])` componentwise,
    /// where `m̄^k` is the slab mean of the modulation. `tol = 0` is the
    /// plain slab-averaged interval test.
    pub fn slab_average_membership(
        &self,
        grid: &TimeGrid,
        k: usize,
        u: &UVector,
        xi: &UVector,
        tol: f64,
    ) -> Result<Membership> {
        if u.len() != xi.len() {
            return Err(Error::ModeMismatch(format!(
                "u has {} components, xi has {}",
                u.len(),
                xi.len()
            )));
        }
        let m = self.slab_modulation(grid, k)?;
        let mut distance = f64::NEG_INFINITY;
        let mut pass = true;
        for (&s, &x) in u.iter().zip(xi.iter()) {
            let (lo, hi) = self.hull(s - tol, s + tol);
            let d = (m * lo - x).max(x - m * hi);
            distance = distance.max(d);
            pass &= d <= MEMBERSHIP_TOL * (1.0 + x.abs());
        }
        if u.is_empty() {
            distance = 0.0;
        }
        Ok(Membership { pass, distance })
    }

    /// Smallest `|s' − s|` with `v ∈ [f̄(s'−), f̄(s'+)]`, searched within
    /// `radius`; `∞` when there is none.
    pub fn horizontal_distance(&self, s: f64, v: f64, radius: f64) -> f64 {
        let (lo, hi) = self.base_interval(s);
        if lo <= v && v <= hi {
            return 0.0;
        }
        let (a, b) = (s - radius, s + radius);
        let mut best = f64::INFINITY;
        for &(sj, _) in self.jumps.iter().filter(|j| j.0 >= a && j.0 <= b) {
            let (lo, hi) = self.base_interval(sj);
            if lo <= v && v <= hi {
                best = best.min((s - sj).abs());
            }
        }
        let mut cuts = vec![a];
        cuts.extend(self.jumps.iter().map(|j| j.0).filter(|&x| x > a && x < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            if let Some((p, q)) = self.preimage(w[0], w[1], v) {
                let d = if s < p {
                    p - s
                } else if s > q {
                    s - q
                } else {
                    0.0
                };
                best = best.min(d);
            }
        }
        best
    }

    /// `{x ∈ [a, b] : f̄(x) = v}` on a jump-free piece, as an interval.
    fn preimage(&self, a: f64, b: f64, v: f64) -> Option<(f64, f64)> {
        let g = |x: f64| {
            let x = x.clamp(a, b);
            if x == a {
                self.right_limit(a)
            } else if x == b {
                self.left_limit(b)
            } else {
                self.left_limit(x)
            }
        };
        if v < g(a) || v > g(b) {
            return None;
        }
        let bisect = |pred: &dyn Fn(f64) -> bool| {
            // first x with pred(x), pred monotone false -> true
            let (mut l, mut r) = (a, b);
            if pred(a) {
                return a;
            }
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                if mid <= l || mid >= r {
                    break;
                }
                if pred(mid) {
                    r = mid;
                } else {
                    l = mid;
                }
            }
            r
        };
        let first = bisect(&|x| g(x) >= v);
        let last_excl = bisect(&|x| g(x) > v);
        Some((first, last_excl.max(first)))
    }

    /// The `ε`-regularized single-valued surrogate.
    pub fn regularize(&self, epsilon: f64) -> Result<RegularizedSelection> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        let min_gap = self.min_gap();
        if epsilon >= 0.5 * min_gap {
            return Err(Error::EpsilonTooLarge { epsilon, min_gap });
        }
        Ok(RegularizedSelection {
            graph: self.clone(),
            epsilon,
        })
    }

    /// Samples `(t, u)` with extreme selections and reports the worst
    /// relative margins of the claimed growth (and, in case B, coercivity)
    /// bounds together with the strict `λ‖ι‖^p < α` margin.
    pub fn validate_growth(
        &self,
        params: &GrowthParams,
        embedding: &Embedding,
        alpha: f64,
        horizon: f64,
        samples: usize,
        seed: u64,
    ) -> Result<GrowthReport> {
        let p = embedding.space().p();
        let n = embedding.u_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut growth = Margin::default();
        let mut coercivity = Margin::default();
        for i in 0..samples {
            let t = rng.gen_range(0.0..=horizon);
            let u = self.sample_u(&mut rng, n, i);
            let m = self.modulation.eval(t);
            let intervals: Vec<(f64, f64)> = u
                .iter()
                .map(|&s| {
                    let (lo, hi) = self.base_interval(s);
                    (m * lo, m * hi)
                })
                .collect();
            let biggest = UVector::from_iterator(
                n,
                intervals.iter().map(|&(lo, hi)| if hi.abs() >= lo.abs() { hi } else { lo }),
            );
            let smallest_pairing = UVector::from_iterator(
                n,
                intervals
                    .iter()
                    .zip(u.iter())
                    .map(|(&(lo, hi), &s)| if lo * s <= hi * s { lo } else { hi }),
            );
            let xi_norm = embedding.u_norm(&biggest)?;
            let u_norm = embedding.u_norm(&u)?;
            match params {
                GrowthParams::A { c1, d1 } => {
                    let bound = c1 + d1 * u_norm;
                    growth.record(bound - xi_norm, 1.0 + bound + xi_norm);
                }
                GrowthParams::B { c2, d2, lambda, g } => {
                    let bound = c2 + d2 * u_norm.powf(p - 1.0);
                    growth.record(bound - xi_norm, 1.0 + bound + xi_norm);
                    let pairing = embedding.pairing(&smallest_pairing, &u)?;
                    let floor = g.eval(t) - lambda * u_norm.powf(p);
                    coercivity.record(pairing - floor, 1.0 + pairing.abs() + floor.abs());
                }
            }
        }
        let mut margins = vec![("growth".to_string(), growth)];
        if let GrowthParams::B { .. } = params {
            margins.push(("coercivity".to_string(), coercivity));
        }
        let lambda_margin = params.lambda_margin(alpha, embedding.iota_norm(), p);
        Ok(GrowthReport {
            hypothesis: HypothesisReport { samples, margins },
            lambda_margin,
            alpha,
        })
    }

    /// Sample 0 is zero; the rest mix random values with values placed
    /// exactly on jumps.
    fn sample_u(&self, rng: &mut ChaCha8Rng, n: usize, i: usize) -> UVector {
        if i == 0 {
            return UVector::zeros(n);
        }
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let on_jumps = !self.jumps.is_empty() && rng.gen_bool(0.3);
        UVector::from_fn(n, |_, _| {
            if on_jumps && rng.gen_bool(0.5) {
                self.jumps[rng.gen_range(0..self.jumps.len())].0
            } else {
                scale * rng.gen_range(-1.0..1.0)
            }
        })
    }
}

/// Outcome of a membership test: `distance` is the worst signed vertical
/// distance to the admissible interval (negative inside).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub pass: bool,
    pub distance: f64,
}

/// Growth and coercivity constants of the multivalued term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case")]
pub enum GrowthParams {
    /// `‖ξ‖_{U*} ≤ c1 + d1 ‖u‖_U`.
    A { c1: f64, d1: f64 },
    /// `‖ξ‖_{U*} ≤ c2 + d2 ‖u‖_U^{p−1}` and `⟨ξ, u⟩ ≥ g(t) − λ ‖u‖_U^p`.
    B {
        c2: f64,
        d2: f64,
        lambda: f64,
        #[serde(default = "zero_profile")]
        g: TimeProfile,
    },
}

fn zero_profile() -> TimeProfile {
    TimeProfile::constant(0.0)
}

impl GrowthParams {
    pub fn check(&self) -> Result<()> {
        let ok = match self {
            GrowthParams::A { c1, d1 } => *c1 >= 0.0 && *d1 >= 0.0,
            GrowthParams::B { c2, d2, lambda, .. } => *c2 >= 0.0 && *d2 >= 0.0 && *lambda > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid growth constants {self:?}")))
        }
    }

    /// `r = max{1, p − 1}`.
    pub fn r(p: f64) -> f64 {
        (p - 1.0).max(1.0)
    }

    /// `α − λ ‖ι‖^p` in case B.
    pub fn lambda_margin(&self, alpha: f64, iota_norm: f64, p: f64) -> Option<f64> {
        match self {
            GrowthParams::A { .. } => None,
            GrowthParams::B { lambda, .. } => Some(alpha - lambda * iota_norm.powf(p)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub hypothesis: HypothesisReport,
    pub lambda_margin: Option<f64>,
    pub alpha: f64,
}

impl GrowthReport {
    /// The `λ` constraint is strict; a margin within rounding of zero fails.
    pub fn lambda_pass(&self) -> bool {
        self.lambda_margin.map_or(true, |m| m > 1e-12 * self.alpha.abs())
    }

    pub fn pass(&self) -> bool {
        self.hypothesis.pass() && self.lambda_pass()
    }
}

impl fmt::Display for GrowthReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.hypothesis)?;
        if let Some(m) = self.lambda_margin {
            let verdict = if self.lambda_pass() { "holds" } else { "VIOLATED" };
            writeln!(f, "  {:<14} alpha - lambda |iota|^p = {m:+.3e}: {verdict}", "lambda")?;
        }
        Ok(())
    }
}

/// `F_ε(t, s) = m(t) f̄_ε(s)`, where `f̄_ε` interpolates linearly across
/// `[s_j − ε, s_j + ε]` and equals `f̄` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedSelection {
    graph: FilledGraph,
    epsilon: f64,
}

impl RegularizedSelection {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn graph(&self) -> &FilledGraph {
        &self.graph
    }

    fn ramp(&self, s: f64) -> Option<(f64, f64, f64)> {
        let eps = self.epsilon;
        let i = self.graph.jumps.partition_point(|j| j.0 < s - eps);
        let &(sj, _) = self.graph.jumps.get(i)?;
        if sj - eps <= s && s <= sj + eps {
            let a = sj - eps;
            let left = self.graph.left_limit(a);
            let right = self.graph.left_limit(sj + eps);
            Some((a, left, (right - left) / (2.0 * eps)))
        } else {
            None
        }
    }

    /// `f̄_ε(s)`.
    pub fn eval_base(&self, s: f64) -> f64 {
        match self.ramp(s) {
            Some((a, left, slope)) => left + (s - a) * slope,
            None => self.graph.left_limit(s),
        }
    }

    /// A generalized derivative of `f̄_ε` at `s`.
    pub fn slope_base(&self, s: f64) -> f64 {
        match self.ramp(s) {
            Some((_, _, slope)) => slope,
            None => self.graph.branch.slope(s),
        }
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.graph.modulation.eval(t) * self.eval_base(s)
    }

    /// Values and slopes of `m · f̄_ε` applied componentwise.
    pub fn apply(&self, m: f64, u: &UVector) -> (UVector, UVector) {
        (
            u.map(|s| m * self.eval_base(s)),
            u.map(|s| m * self.slope_base(s)),
        )
    }
}
