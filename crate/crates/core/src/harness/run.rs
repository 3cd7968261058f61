use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{apriori, grid_times_from, l2_h_error, lp_v_error, pointwise_h_error, AprioriReport, ExactReference, OrderFit, Reference};
use crate::error::Result;
use crate::fem::DiscreteFunction;
use crate::interpolants::{bar_track, bbb_identity, hat_track, PiecewiseLinearTrack};
use crate::stepper::{admissible_tau0, solve_trajectory, Problem, ThetaConfig, TrajectorySolution};
use crate::time_grid::{RatioCheck, TimeGrid};

use super::config::RunConfig;
use super::scenario::{ReferenceKind, Scenario};

pub const NONUNIQUENESS_NOTE: &str =
    "fine-grid reference: the inclusion need not have a unique solution, so errors measure distance to one discrete solution";

/// Grid summary in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub r_max: f64,
    pub tau_max: f64,
    pub tau_min: f64,
}

impl GridSummary {
    pub fn of(grid: &TimeGrid) -> Self {
        let r = grid.regularity();
        Self {
            n: grid.count(),
            k: r.k_observed,
            r_max: r.r_max,
            tau_max: r.tau_max,
            tau_min: r.tau_min,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// Max over grid times `t ≥ epsilon_offset` of the `H` error.
    pub pointwise_h: f64,
    pub l2_h: f64,
    pub lp_v: f64,
    pub reference: String,
    /// Largest residual certificate of a fine-grid reference.
    pub reference_max_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma43 {
    pub sum_ak: f64,
    pub sum_xi: f64,
    pub sum_der: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// `None` when unbounded.
    pub tau0: Option<f64>,
    pub strict: bool,
    pub all_admissible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub bbb_residual: f64,
    /// Largest slab residual of the algebraic relation in the `H` inner
    /// product, relative to `1 + ‖u^k‖² + ‖u^{k−1}‖²`.
    pub algebraic_residual: f64,
    pub ratio_condition: RatioCheck,
    pub admissibility: Admissibility,
    /// Largest recomputed residual certificate.
    pub max_residual: f64,
    pub max_clamp_distance: f64,
    /// Whether every clamp distance is within its `ε^k`.
    pub clamp_within_epsilon: bool,
    pub membership_pass: bool,
    pub worst_membership_distance: f64,
    pub picard_steps: usize,
}

/// Diagnostics of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub theta: f64,
    pub grid: GridSummary,
    pub apriori: AprioriReport,
    pub lemma43: Lemma43,
    pub errors: Option<ErrorSummary>,
    /// Empty for single runs; studies report orders per family.
    pub orders: BTreeMap<String, OrderFit>,
    pub checks: Checks,
    pub notes: Vec<String>,
}

/// Everything a run produces.
pub struct RunOutput {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub problem: Problem,
    pub solution: TrajectorySolution,
    pub report: RunReport,
}

/// A comparison target for errors.
pub enum ReferenceSolution {
    Exact(ExactReference),
    Fine {
        track: PiecewiseLinearTrack<DiscreteFunction>,
        max_residual: f64,
    },
}

impl ReferenceSolution {
    pub fn as_dyn(&self) -> &dyn Reference {
        match self {
            ReferenceSolution::Exact(r) => r,
            ReferenceSolution::Fine { track, .. } => track,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ReferenceSolution::Exact(_) => "exact".into(),
            ReferenceSolution::Fine { track, .. } => format!("fine_grid(N={})", track.grid().count()),
        }
    }

    pub fn is_fine(&self) -> bool {
        matches!(self, ReferenceSolution::Fine { .. })
    }

    pub fn max_residual(&self) -> Option<f64> {
        match self {
            ReferenceSolution::Exact(_) => None,
            ReferenceSolution::Fine { max_residual, .. } => Some(*max_residual),
        }
    }
}

/// The scenario's reference; fine-grid references use a uniform grid with
/// `fine_n` slabs.
pub fn build_reference(
    scenario: &Scenario,
    problem: &Problem,
    u0: &DiscreteFunction,
    base: &ThetaConfig,
    fine_n: usize,
) -> Result<ReferenceSolution> {
    match &scenario.reference {
        ReferenceKind::Exact(u) => {
            let u = u.clone();
            Ok(ReferenceSolution::Exact(ExactReference::new(problem.space.clone(), move |t, x| u(t, x))))
        }
        ReferenceKind::FineGrid { theta, .. } => {
            let grid = TimeGrid::uniform(scenario.horizon, fine_n)?;
            let cfg = ThetaConfig {
                theta: *theta,
                strict_admissibility: false,
                ..base.clone()
            };
            info!("solving fine reference with N = {fine_n}");
            let sol = solve_trajectory(&cfg, problem, &grid, u0)?;
            let max_residual = sol.certificates(&cfg, problem)?.into_iter().fold(0.0, f64::max);
            Ok(ReferenceSolution::Fine {
                track: hat_track(&sol)?,
                max_residual,
            })
        }
    }
}

pub fn reference_factor(scenario: &Scenario) -> usize {
    match scenario.reference {
        ReferenceKind::Exact(_) => 1,
        ReferenceKind::FineGrid { factor, .. } => factor,
    }
}

/// Assembles the report of a finished trajectory.
pub fn assemble_report(
    scenario: &Scenario,
    cfg: &ThetaConfig,
    problem: &Problem,
    sol: &TrajectorySolution,
    reference: Option<&ReferenceSolution>,
    epsilon_offset: f64,
) -> Result<RunReport> {
    let hat = hat_track(sol)?;
    let bar = bar_track(sol)?;
    let errors = match reference {
        Some(r) => {
            let times = grid_times_from(&hat, epsilon_offset);
            Some(ErrorSummary {
                pointwise_h: pointwise_h_error(&hat, r.as_dyn(), &times)?,
                l2_h: l2_h_error(&hat, r.as_dyn())?,
                lp_v: lp_v_error(&bar, r.as_dyn())?,
                reference: r.label(),
                reference_max_residual: r.max_residual(),
            })
        }
        None => None,
    };
    let tau0 = admissible_tau0(
        &problem.operator,
        problem.inclusion.as_ref().map(|i| &i.growth),
        &problem.inclusion.as_ref().map_or(crate::fem::EmbeddingSpec::source(), |i| *i.embedding.spec()),
        sol.theta,
    )?;
    let memberships = sol.memberships(problem)?;
    let certificates = sol.certificates(cfg, problem)?;
    let mut algebraic_residual = 0.0_f64;
    for k in 1..=sol.grid.count() {
        let (a, b) = (&sol.states[k], &sol.states[k - 1]);
        let d = a.sub(b)?;
        let lhs = d.h_inner(&sol.mids[k - 1])?;
        let (na, nb) = (a.h_norm().powi(2), b.h_norm().powi(2));
        let rhs = 0.5 * (na - nb + (2.0 * sol.theta - 1.0) * d.h_norm().powi(2));
        algebraic_residual = algebraic_residual.max((lhs - rhs).abs() / (1.0 + na + nb));
    }
    let checks = Checks {
        bbb_residual: bbb_identity(&hat, &bar, sol.theta)?.residual,
        algebraic_residual,
        ratio_condition: sol.grid.validate_ratio_condition(sol.theta, problem.space.p())?,
        admissibility: Admissibility {
            tau0: tau0.value.is_finite().then_some(tau0.value),
            strict: tau0.strict,
            all_admissible: sol.meta.iter().all(|m| m.admissible),
        },
        max_residual: certificates.iter().copied().fold(0.0, f64::max),
        max_clamp_distance: sol.meta.iter().map(|m| m.clamp_distance).fold(0.0, f64::max),
        clamp_within_epsilon: sol.meta.iter().all(|m| m.clamp_distance <= m.epsilon),
        membership_pass: memberships.iter().all(|m| m.pass),
        worst_membership_distance: memberships.iter().map(|m| m.distance).fold(0.0, f64::max),
        picard_steps: sol.meta.iter().filter(|m| m.picard).count(),
    };
    let mut notes = Vec::new();
    if reference.is_some_and(ReferenceSolution::is_fine) {
        notes.push(NONUNIQUENESS_NOTE.to_string());
    }
    if sol.theta < 0.5 {
        notes.push("theta below 1/2: stability estimates are not covered".into());
    }
    if !checks.ratio_condition.pass {
        notes.push("grid violates the step-ratio condition".into());
    }
    let apriori = apriori(sol, problem)?;
    Ok(RunReport {
        scenario: scenario.name.clone(),
        theta: sol.theta,
        grid: GridSummary::of(&sol.grid),
        apriori,
        lemma43: Lemma43 {
            sum_ak: apriori.sum_ak,
            sum_xi: apriori.sum_xi,
            sum_der: apriori.sum_der,
        },
        errors,
        orders: BTreeMap::new(),
        checks,
        notes,
    })
}

/// Solves the configured problem and assembles its report.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let cfg = config.theta_config()?;
    let scenario = config.scenario()?;
    let grid = config.grid.build(scenario.horizon)?;
    let (problem, u0) = scenario.build()?;
    info!(
        "solving '{}' with theta = {} on {} slabs",
        scenario.name,
        cfg.theta,
        grid.count()
    );
    let solution = solve_trajectory(&cfg, &problem, &grid, &u0)?;
    let reference = build_reference(&scenario, &problem, &u0, &cfg, reference_factor(&scenario) * grid.count())?;
    let report = assemble_report(&scenario, &cfg, &problem, &solution, Some(&reference), config.epsilon_offset)?;
    Ok(RunOutput {
        config: config.clone(),
        scenario,
        problem,
        solution,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{GridConfig, GridKindName, MeshOverride};

    fn desk(theta: f64) -> RunConfig {
        RunConfig::new(
            "ode_desk",
            theta,
            GridConfig {
                kind: GridKindName::Uniform,
                n: 4,
                k_target: None,
                seed: None,
            },
        )
    }

    #[test]
    fn desk_run_reports_consistent_checks() {
        let out = run(&desk(1.0)).unwrap();
        let r = &out.report;
        assert_eq!(r.grid.n, 4);
        assert!(r.checks.max_residual <= 1e-10);
        assert!(r.checks.membership_pass);
        assert!(r.checks.clamp_within_epsilon);
        assert_eq!(r.notes, vec![NONUNIQUENESS_NOTE.to_string()]);
        assert_eq!(r.checks.admissibility.tau0, None);
    }

    #[test]
    fn crank_nicolson_increment_sum_vanishes() {
        let out = run(&desk(0.5)).unwrap();
        assert_eq!(out.report.apriori.increment_sum, 0.0);
        assert!(out.report.checks.bbb_residual <= 1e-12);
        assert!(out.report.checks.algebraic_residual <= 1e-12);
    }

    #[test]
    fn heat_errors_use_exact_reference() {
        let mut cfg = desk(1.0);
        cfg.scenario = "heat".into();
        cfg.mesh = Some(MeshOverride {
            elements: Some(32),
            ..Default::default()
        });
        let out = run(&cfg).unwrap();
        let e = out.report.errors.unwrap();
        assert_eq!(e.reference, "exact");
        assert!(e.pointwise_h > 0.0 && e.pointwise_h < 0.1);
        assert!(out.report.notes.is_empty());
    }
}
