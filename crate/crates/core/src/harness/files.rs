//! Trajectory directories: `config.json`, `report.json`, `states.csv`,
//! `mids.csv`, `selections.csv` and `steps.csv`.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{DiscreteFunction, FemSpace, SpaceExt, UVector};
use crate::stepper::{Problem, StepMeta, TrajectorySolution};

use super::config::RunConfig;
use super::scenario::Scenario;
use super::run::{assemble_report, build_reference, reference_factor, RunOutput, RunReport};

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_functions(path: &Path, times: &[f64], first_k: usize, fs_: &[DiscreteFunction], space: &FemSpace) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend(space.mesh().nodes().iter().map(|x| format!("x={x}")));
    w.write_record(&header)?;
    for (i, f) in fs_.iter().enumerate() {
        let mut row = vec![(first_k + i).to_string(), fmt(times[first_k + i])];
        row.extend(f.nodal_values().into_iter().map(fmt));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes a run to `dir`, creating it if needed.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let sol = &out.solution;
    let space = sol.space();
    let t = sol.grid.points();
    write_functions(&dir.join("states.csv"), t, 0, &sol.states, space)?;
    write_functions(&dir.join("mids.csv"), t, 1, &sol.mids, space)?;

    let mut w = writer(&dir.join("selections.csv"))?;
    let width = sol.selections.first().map_or(0, |x| x.len());
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((0..width).map(|j| format!("xi{j}")));
    w.write_record(&header)?;
    for (i, xi) in sol.selections.iter().enumerate() {
        let mut row = vec![(i + 1).to_string(), fmt(t[i + 1])];
        row.extend(xi.iter().map(|&v| fmt(v)));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("steps.csv"))?;
    w.write_record([
        "k",
        "t",
        "tau",
        "iterations",
        "residual",
        "clamp_distance",
        "epsilon",
        "picard",
        "admissible",
    ])?;
    for (i, m) in sol.meta.iter().enumerate() {
        let k = i + 1;
        w.write_record([
            k.to_string(),
            fmt(t[k]),
            fmt(sol.grid.tau(k)),
            m.iterations.to_string(),
            fmt(m.residual),
            fmt(m.clamp_distance),
            fmt(m.epsilon),
            m.picard.to_string(),
            m.admissible.to_string(),
        ])?;
    }
    w.flush()?;

    write_json(&dir.join("config.json"), &out.config)?;
    write_json(&dir.join("report.json"), &out.report)?;
    Ok(())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: cannot parse '{s}' as a number")))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut r = reader(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), i + 2)))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

fn read_functions(path: &Path, space: &std::sync::Arc<FemSpace>, first_k: usize, times: &[f64]) -> Result<Vec<DiscreteFunction>> {
    let nodes = space.mesh().nodes().len();
    read_rows(path)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let what = format!("{} row {}", path.display(), i + 2);
            if row.len() != nodes + 2 {
                return Err(Error::Config(format!("{what}: expected {} columns, found {}", nodes + 2, row.len())));
            }
            let t = parse_f64(&row[1], &what)?;
            if t != times[first_k + i] {
                return Err(Error::Config(format!("{what}: time {t} does not match the configured grid")));
            }
            let mut coeffs = DVector::zeros(space.dim());
            for (node, cell) in row[2..].iter().enumerate() {
                if let Some(j) = space.mesh().free_index(node) {
                    coeffs[j] = parse_f64(cell, &what)?;
                }
            }
            space.function(coeffs)
        })
        .collect()
}

fn parse_bool(s: &str, what: &str) -> Result<bool> {
    s.parse()
        .map_err(|_| Error::Config(format!("{what}: expected true or false, found '{s}'")))
}

/// Rebuilds the trajectory stored in `dir` against the problem of its own
/// configuration.
pub fn read_trajectory(dir: &Path) -> Result<StoredRun> {
    let config = RunConfig::load(&dir.join("config.json"))?;
    let scenario = config.scenario()?;
    let grid = config.grid.build(scenario.horizon)?;
    let (problem, u0) = scenario.build()?;
    let space = problem.space.clone();
    let t = grid.points();
    let states = read_functions(&dir.join("states.csv"), &space, 0, t)?;
    let mids = read_functions(&dir.join("mids.csv"), &space, 1, t)?;
    let selections = read_rows(&dir.join("selections.csv"))?
        .iter()
        .map(|row| {
            let vals = row[2..]
                .iter()
                .map(|c| parse_f64(c, "selections.csv"))
                .collect::<Result<Vec<_>>>()?;
            Ok(UVector::from_vec(vals))
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = read_rows(&dir.join("steps.csv"))?
        .iter()
        .map(|row| {
            let what = "steps.csv";
            if row.len() != 9 {
                return Err(Error::Config(format!("{what}: expected 9 columns, found {}", row.len())));
            }
            Ok(StepMeta {
                iterations: row[3]
                    .parse()
                    .map_err(|_| Error::Config(format!("{what}: bad iteration count '{}'", row[3])))?,
                residual: parse_f64(&row[4], what)?,
                clamp_distance: parse_f64(&row[5], what)?,
                epsilon: parse_f64(&row[6], what)?,
                picard: parse_bool(&row[7], what)?,
                admissible: parse_bool(&row[8], what)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = grid.count();
    if states.len() != n + 1 || mids.len() != n || selections.len() != n || meta.len() != n {
        return Err(Error::Config(format!(
            "trajectory in {} does not match its grid of {n} slabs",
            dir.display()
        )));
    }
    Ok(StoredRun {
        solution: TrajectorySolution {
            grid,
            theta: config.theta,
            states,
            mids,
            selections,
            meta,
        },
        config,
        scenario,
        problem,
        u0,
    })
}

pub struct StoredRun {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub problem: Problem,
    pub u0: DiscreteFunction,
    pub solution: TrajectorySolution,
}

/// Recomputed report of a stored trajectory and whether it reproduces the
/// stored `report.json`.
pub struct Diagnosis {
    pub report: RunReport,
    pub matches_stored: bool,
}

pub fn diagnose(dir: &Path) -> Result<Diagnosis> {
    let StoredRun {
        config,
        scenario,
        problem,
        u0,
        solution: sol,
    } = read_trajectory(dir)?;
    let cfg = config.theta_config()?;
    let reference = build_reference(&scenario, &problem, &u0, &cfg, reference_factor(&scenario) * sol.grid.count())?;
    let report = assemble_report(&scenario, &cfg, &problem, &sol, Some(&reference), config.epsilon_offset)?;
    let stored: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)?;
    let matches_stored = serde_json::to_value(&report)? == stored;
    Ok(Diagnosis { report, matches_stored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{GridConfig, GridKindName};
    use crate::harness::run::run;

    #[test]
    fn round_trip_reproduces_report() {
        let cfg = RunConfig::new(
            "jump_source",
            1.0,
            GridConfig {
                kind: GridKindName::RandomRegular,
                n: 6,
                k_target: Some(2.0),
                seed: Some(4),
            },
        );
        let mut cfg = cfg;
        cfg.mesh = Some(crate::harness::config::MeshOverride {
            elements: Some(16),
            ..Default::default()
        });
        let out = run(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &out).unwrap();
        let d = diagnose(dir.path()).unwrap();
        assert!(d.matches_stored);
        assert_eq!(d.report, out.report);
        let states = fs::read_to_string(dir.path().join("states.csv")).unwrap();
        assert_eq!(states.lines().count(), 8);
        assert!(!states.contains('\r'));
        assert!(states.starts_with("k,t,x=0,"));
    }
}
