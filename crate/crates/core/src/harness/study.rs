use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{observed_order, uniformity_ratio, OrderFit};
use crate::error::{Error, Result};
use crate::stepper::solve_trajectory;
use crate::time_grid::TimeGrid;

use super::config::StudyPlan;
use super::run::{assemble_report, build_reference, reference_factor, RunReport, NONUNIQUENESS_NOTE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRun {
    pub family: usize,
    pub theta: f64,
    pub report: RunReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub pointwise_h: OrderFit,
    pub l2_h: OrderFit,
    pub lp_v: OrderFit,
}

/// `max / min` of the stability quantities across a family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    pub lhs_lemma42: f64,
    pub sum_ak: f64,
    pub sum_xi: f64,
    pub sum_der: f64,
}

impl Uniformity {
    pub fn worst(&self) -> f64 {
        self.lhs_lemma42.max(self.sum_ak).max(self.sum_xi).max(self.sum_der)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: usize,
    pub label: String,
    pub theta: f64,
    #[serde(rename = "N")]
    pub counts: Vec<usize>,
    pub tau_max: Vec<f64>,
    pub pointwise_h: Vec<f64>,
    /// Omitted for fewer than three grids.
    pub orders: Option<Orders>,
    pub strictly_decreasing: bool,
    pub uniformity: Uniformity,
    pub max_abs_increment_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario: String,
    pub reference: String,
    pub runs: Vec<StudyRun>,
    pub families: Vec<FamilySummary>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl StudyReport {
    pub fn family(&self, family: usize, theta: f64) -> Option<&FamilySummary> {
        self.families.iter().find(|f| f.family == family && f.theta == theta)
    }
}

fn fit(errors: &[[f64; 3]], taus: &[f64]) -> Result<Orders> {
    Ok(Orders {
        pointwise_h: observed_order(&errors.iter().map(|e| e[0]).collect::<Vec<_>>(), taus)?,
        l2_h: observed_order(&errors.iter().map(|e| e[1]).collect::<Vec<_>>(), taus)?,
        lp_v: observed_order(&errors.iter().map(|e| e[2]).collect::<Vec<_>>(), taus)?,
    })
}

/// Runs every `(family, θ, N)` of the plan on at most `jobs` threads.
pub fn run_study(plan: &StudyPlan, jobs: Option<usize>) -> Result<StudyReport> {
    plan.check()?;
    let scenario = plan.scenario()?;
    let (problem, u0) = scenario.build()?;
    let families = plan
        .grids
        .iter()
        .map(|g| TimeGrid::family(scenario.horizon, &g.kind()?, &g.counts))
        .collect::<Result<Vec<_>>>()?;
    let n_max = plan.grids.iter().flat_map(|g| g.counts.iter().copied()).max().unwrap_or(1);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let base = plan.theta_config(plan.thetas[0])?;
    let reference = build_reference(&scenario, &problem, &u0, &base, reference_factor(&scenario) * n_max)?;

    let tasks: Vec<(usize, f64, &TimeGrid)> = families
        .iter()
        .enumerate()
        .flat_map(|(f, grids)| {
            plan.thetas
                .iter()
                .flat_map(move |&theta| grids.iter().map(move |g| (f, theta, g)))
        })
        .collect();
    let runs = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(family, theta, grid)| {
                let cfg = plan.theta_config(theta)?;
                info!("study run: family {family}, theta = {theta}, N = {}", grid.count());
                let sol = solve_trajectory(&cfg, &problem, grid, &u0)?;
                let report = assemble_report(&scenario, &cfg, &problem, &sol, Some(&reference), plan.epsilon_offset)?;
                Ok(StudyRun { family, theta, report })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut warnings = Vec::new();
    let mut summaries = Vec::new();
    for (f, spec) in plan.grids.iter().enumerate() {
        for &theta in &plan.thetas {
            let members: Vec<&RunReport> = runs
                .iter()
                .filter(|r| r.family == f && r.theta == theta)
                .map(|r| &r.report)
                .collect();
            let taus: Vec<f64> = members.iter().map(|r| r.grid.tau_max).collect();
            let errs: Vec<[f64; 3]> = members
                .iter()
                .map(|r| {
                    let e = r.errors.as_ref().expect("study runs carry errors");
                    [e.pointwise_h, e.l2_h, e.lp_v]
                })
                .collect();
            let orders = if members.len() < 3 {
                let msg = format!(
                    "family {f} ({}), theta = {theta}: {} grids are too few for an order fit; orders omitted",
                    spec.label(),
                    members.len()
                );
                warn!("{msg}");
                warnings.push(msg);
                None
            } else {
                match fit(&errs, &taus) {
                    Ok(o) => Some(o),
                    Err(e) => {
                        let msg = format!("family {f}, theta = {theta}: no order fit ({e})");
                        warn!("{msg}");
                        warnings.push(msg);
                        None
                    }
                }
            };
            let col = |g: fn(&RunReport) -> f64| uniformity_ratio(&members.iter().map(|r| g(r)).collect::<Vec<_>>());
            summaries.push(FamilySummary {
                family: f,
                label: spec.label(),
                theta,
                counts: members.iter().map(|r| r.grid.n).collect(),
                tau_max: taus.clone(),
                pointwise_h: errs.iter().map(|e| e[0]).collect(),
                orders,
                strictly_decreasing: errs.windows(2).all(|w| w[1][0] < w[0][0]),
                uniformity: Uniformity {
                    lhs_lemma42: col(|r| r.apriori.lhs_lemma42),
                    sum_ak: col(|r| r.apriori.sum_ak),
                    sum_xi: col(|r| r.apriori.sum_xi),
                    sum_der: col(|r| r.apriori.sum_der),
                },
                max_abs_increment_sum: members
                    .iter()
                    .map(|r| r.apriori.increment_sum.abs())
                    .fold(0.0, f64::max),
            });
        }
    }
    let mut notes = Vec::new();
    if reference.is_fine() {
        notes.push(NONUNIQUENESS_NOTE.to_string());
    }
    Ok(StudyReport {
        scenario: scenario.name.clone(),
        reference: reference.label(),
        runs,
        families: summaries,
        warnings,
        notes,
    })
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes `study.json`, `summary.csv` and one report per run under `runs/`.
pub fn write_study(dir: &Path, report: &StudyReport) -> Result<()> {
    fs::create_dir_all(dir.join("runs"))?;
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(dir.join("study.json"), text)?;
    for r in &report.runs {
        let mut text = serde_json::to_string_pretty(&r.report)?;
        text.push('\n');
        fs::write(
            dir.join("runs")
                .join(format!("family{}_theta{}_N{}.json", r.family, r.theta, r.report.grid.n)),
            text,
        )?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join("summary.csv"))?;
    w.write_record([
        "family",
        "theta",
        "N",
        "K",
        "tau_max",
        "pointwise_h",
        "l2_h",
        "lp_v",
        "order_pointwise_h",
        "lhs_lemma42",
        "sum_ak",
        "sum_xi",
        "sum_der",
        "increment_sum",
        "max_residual",
        "max_clamp_distance",
        "membership_pass",
    ])?;
    for fam in &report.families {
        let members: Vec<&RunReport> = report
            .runs
            .iter()
            .filter(|r| r.family == fam.family && r.theta == fam.theta)
            .map(|r| &r.report)
            .collect();
        for (i, r) in members.iter().enumerate() {
            let e = r.errors.as_ref().expect("study runs carry errors");
            let local = if i == 0 {
                String::new()
            } else {
                let prev = members[i - 1];
                let pe = prev.errors.as_ref().expect("study runs carry errors").pointwise_h;
                fmt((pe / e.pointwise_h).ln() / (prev.grid.tau_max / r.grid.tau_max).ln())
            };
            w.write_record([
                fam.family.to_string(),
                fmt(fam.theta),
                r.grid.n.to_string(),
                fmt(r.grid.k),
                fmt(r.grid.tau_max),
                fmt(e.pointwise_h),
                fmt(e.l2_h),
                fmt(e.lp_v),
                local,
                fmt(r.apriori.lhs_lemma42),
                fmt(r.apriori.sum_ak),
                fmt(r.apriori.sum_xi),
                fmt(r.apriori.sum_der),
                fmt(r.apriori.increment_sum),
                fmt(r.checks.max_residual),
                fmt(r.checks.max_clamp_distance),
                r.checks.membership_pass.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
