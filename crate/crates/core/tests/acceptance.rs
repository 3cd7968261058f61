//! Acceptance suite. Prints one line per criterion and exits nonzero when any
//! criterion fails.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use theta_incl::diagnostics::{algebraic_identity_check, observed_order};
use theta_incl::fem::{BoundaryCondition, EmbeddingSpec, FemSpace, SpaceExt, SpatialMesh};
use theta_incl::harness::config::{GridFamilyConfig, GridKindName, MeshOverride, MultifunctionOverride, GrowthParamsConfig};
use theta_incl::harness::{run_study, RunConfig, Scenario, StudyPlan, StudyReport};
use theta_incl::interpolants::{bbb_identity, bvq_seminorm, clement_project, l2_error_scalar, theta_mids, PiecewiseLinearTrack};
use theta_incl::multifunction::GrowthParams;
use theta_incl::operators::{OperatorSpec, SourceSpec, TimeProfile};
use theta_incl::stepper::{admissible_tau0, step, Problem, ThetaConfig};
use theta_incl::time_grid::{GridKind, TimeGrid};
use theta_incl::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn algebraic_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for _ in 0..1_000_000 {
        let s = 10f64.powf(rng.gen_range(-3.0..3.0));
        let a = s * rng.gen_range(-1.0..1.0);
        let b = s * rng.gen_range(-1.0..1.0);
        let theta = rng.gen_range(0.0..=1.0);
        let scale = 1.0 + a * a + b * b;
        worst = worst.max(algebraic_identity_check(a, b, theta) / scale);
    }
    outcome(worst <= 1e-12, format!("worst residual/scale {worst:.3e} (tol 1e-12)"))
}

fn bbb() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    let mut worst_half = 0.0_f64;
    for i in 0..100 {
        let n = rng.gen_range(1..=64);
        let grid = TimeGrid::random_regular(rng.gen_range(0.5..2.0), n, rng.gen_range(1.0..4.0), i).unwrap();
        let theta = if i % 10 == 0 { 0.5 } else { rng.gen_range(0.5..=1.0) };
        let states: Vec<f64> = (0..=n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let hat = PiecewiseLinearTrack::new(grid, states).unwrap();
        let bar = theta_mids(&hat, theta).unwrap();
        let id = bbb_identity(&hat, &bar, theta).unwrap();
        worst = worst.max(id.residual / (1.0 + id.rhs.abs()));
        if theta == 0.5 {
            worst_half = worst_half.max(id.lhs.abs());
        }
    }
    outcome(
        worst <= 1e-12 && worst_half <= 1e-12,
        format!("worst |lhs-rhs|/(1+|rhs|) {worst:.3e}, worst |lhs| at theta=1/2 {worst_half:.3e} (tol 1e-12)"),
    )
}

/// Every chain `0 = i_0 < … < i_m = n−1`, summed left to right.
fn brute_bvq(values: &[f64], q: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner = n - 2;
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << inner) {
        let mut chain = vec![0];
        chain.extend((0..inner).filter(|b| mask & (1 << b) != 0).map(|b| b + 1));
        chain.push(n - 1);
        let mut sum = 0.0;
        for w in chain.windows(2) {
            sum += (values[w[1]] - values[w[0]]).abs().powf(q);
        }
        best = best.max(sum);
    }
    best
}

fn bvq() -> Outcome {
    let dist = |a: &f64, b: &f64| Ok((a - b).abs());
    let fixed = [
        (vec![0.0, 1.0, 3.0], 9.0),
        (vec![0.0, 1.0, 0.0], 2.0),
    ];
    let mut failures = 0;
    for (v, expect) in &fixed {
        if bvq_seminorm(v, 2.0, dist).unwrap() != *expect {
            failures += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let qs = [1.0, 1.5, 2.0, 3.0];
    for i in 0..500 {
        let n = rng.gen_range(1..=12);
        let q = qs[i % 4];
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if bvq_seminorm(&v, q, dist).unwrap() != brute_bvq(&v, q) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} mismatches in 502 cases (exact equality)"))
}

fn desk() -> Outcome {
    let sc = Scenario::named("ode_desk").unwrap();
    let (pb, u0) = sc.build().unwrap();
    let grid = TimeGrid::uniform(1.0, 1).unwrap();
    let cfg = ThetaConfig::new(1.0).unwrap();
    let r = step(&cfg, &pb, &grid, 1, &u0).unwrap();
    let u_err = r.u.nodal_values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let xi_err = r.xi.iter().fold(0.0_f64, |m, x| m.max((x - 0.5).abs()));
    let desk_ok = u_err <= 1e-9 && xi_err <= r.meta.epsilon + 1e-9;

    let space = FemSpace::new(SpatialMesh::uniform(1.0, 1, BoundaryCondition::Natural).unwrap(), 2.0).unwrap();
    let mut op = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
    op.reaction = 1.0;
    let ode = Problem {
        space: Arc::clone(&space),
        operator: op,
        inclusion: None,
        source: SourceSpec::zero(),
    };
    let grid = TimeGrid::uniform(0.1, 1).unwrap();
    let one = space.interpolate(|_| 1.0);
    let mut ode_err = 0.0_f64;
    for theta in [0.5, 0.75, 1.0] {
        let r = step(&ThetaConfig::new(theta).unwrap(), &ode, &grid, 1, &one).unwrap();
        let exact = (1.0 - (1.0 - theta) * 0.1) / (1.0 + theta * 0.1);
        for v in r.u.nodal_values() {
            ode_err = ode_err.max((v - exact).abs());
        }
    }
    outcome(
        desk_ok && ode_err <= 1e-12,
        format!(
            "desk |u1| {u_err:.1e}, |xi1-0.5| {xi_err:.1e} (tol eps {:.1e} + 1e-9); ODE error {ode_err:.1e} (tol 1e-12)",
            r.meta.epsilon
        ),
    )
}

fn families(k_target: f64, seed: u64, counts: &[usize], uniform: bool) -> Vec<GridFamilyConfig> {
    let mut out = Vec::new();
    if uniform {
        out.push(GridFamilyConfig {
            kind: GridKindName::Uniform,
            counts: counts.to_vec(),
            k_target: None,
            seed: None,
        });
    }
    out.push(GridFamilyConfig {
        kind: GridKindName::RandomRegular,
        counts: counts.to_vec(),
        k_target: Some(k_target),
        seed: Some(seed),
    });
    out
}

const COUNTS: [usize; 4] = [8, 16, 32, 64];

fn heat_study(elements: Option<usize>) -> StudyReport {
    let mut plan = StudyPlan::new("heat", vec![1.0, 0.5], families(2.0, 17, &COUNTS, true));
    plan.mesh = elements.map(|e| MeshOverride {
        elements: Some(e),
        ..Default::default()
    });
    run_study(&plan, None).unwrap()
}

fn heat(study: &StudyReport) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for fam in &study.families {
        let slope = fam.orders.as_ref().map_or(f64::NAN, |o| o.pointwise_h.slope);
        let (lo, hi) = if fam.theta == 1.0 { (0.8, 1.2) } else { (1.7, 2.2) };
        pass &= slope >= lo && slope <= hi;
        parts.push(format!("{} theta={}: {slope:.3} in [{lo}, {hi}]", fam.label, fam.theta));
    }
    let coarse = heat_study(Some(2048));
    let mut worst = 0.0_f64;
    for (a, b) in study.families.iter().zip(&coarse.families) {
        let (ea, eb) = (a.pointwise_h[3], b.pointwise_h[3]);
        worst = worst.max((ea - eb).abs() / ea);
    }
    pass &= worst <= 0.1;
    parts.push(format!("mesh-halving change of finest error {worst:.2e} (tol 0.1)"));
    outcome(pass, parts.join("; "))
}

fn jump_study() -> StudyReport {
    let plan = StudyPlan::new("jump_source", vec![1.0], families(2.0, 23, &COUNTS, false));
    run_study(&plan, None).unwrap()
}

fn jump(study: &StudyReport) -> Outcome {
    let fam = &study.families[0];
    let runs = study.runs.iter().map(|r| &r.report);
    let membership = runs.clone().all(|r| r.checks.membership_pass);
    let clamp = runs.clone().all(|r| r.checks.clamp_within_epsilon);
    let max_res = runs.clone().map(|r| r.checks.max_residual).fold(0.0, f64::max);
    let ref_res = runs
        .clone()
        .filter_map(|r| r.errors.as_ref().and_then(|e| e.reference_max_residual))
        .fold(0.0, f64::max);
    outcome(
        fam.strictly_decreasing && membership && clamp && max_res <= 1e-10 && ref_res <= 1e-10,
        format!(
            "errors {:?} strictly decreasing: {}; membership {membership}; clamp <= eps {clamp}; max certificate {max_res:.2e}, reference {ref_res:.2e} (tol 1e-10)",
            fam.pointwise_h.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            fam.strictly_decreasing
        ),
    )
}

fn uniformity(studies: &[&StudyReport]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in studies {
        for fam in &s.families {
            let w = fam.uniformity.worst();
            pass &= w < 1.25;
            if fam.theta == 0.5 {
                pass &= fam.max_abs_increment_sum == 0.0;
            }
            parts.push(format!("{} {} theta={}: ratio {w:.3}", s.scenario, fam.label, fam.theta));
        }
    }
    outcome(pass, format!("{} (tol < 1.25; increment sum exactly 0 at theta=1/2)", parts.join(", ")))
}

fn clement() -> Outcome {
    let mut errs = Vec::new();
    let mut worst = 0.0_f64;
    for n in [4, 8, 16, 32, 64] {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        let e = l2_error_scalar(&clement_project(|t| t, &grid).unwrap(), |t| t);
        let exact = (1.0 / n as f64) / (2.0 * 3f64.sqrt());
        worst = worst.max((e - exact).abs());
        errs.push(e);
    }
    let halving = errs.windows(2).map(|w| (w[0] / w[1] - 2.0).abs()).fold(0.0, f64::max);
    let counts = [8, 16, 32, 64, 128];
    let grids = TimeGrid::family(1.0, &GridKind::RandomRegular { k_target: 2.0, seed: 31 }, &counts).unwrap();
    let f = |t: f64| (2.0 * PI * t).sin();
    let e: Vec<f64> = grids
        .iter()
        .map(|g| l2_error_scalar(&clement_project(f, g).unwrap(), f))
        .collect();
    let taus: Vec<f64> = grids.iter().map(TimeGrid::tau_max).collect();
    let slope = observed_order(&e, &taus).unwrap().slope;
    outcome(
        worst <= 1e-12 && halving <= 1e-9 && (slope - 1.0).abs() <= 0.2,
        format!("|err - tau/(2 sqrt 3)| {worst:.1e} (tol 1e-12); halving ratio deviation {halving:.1e}; sin order {slope:.3} (1 +- 0.2)"),
    )
}

fn gates() -> Outcome {
    let mut op = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
    op.beta = 2.0;
    let b = GrowthParams::B {
        c2: 1.0,
        d2: 1.0,
        lambda: 0.1,
        g: TimeProfile::constant(0.0),
    };
    let tau_b = admissible_tau0(&op, Some(&b), &EmbeddingSpec::source(), 1.0).unwrap().value;
    op.beta = 0.0;
    let a = GrowthParams::A { c1: 1.0, d1: 1.0 };
    let tau_a = admissible_tau0(&op, Some(&a), &EmbeddingSpec::source(), 1.0).unwrap().value;

    let mut boundary = Scenario::named("plap_jump").unwrap();
    boundary
        .apply_multifunction(&MultifunctionOverride {
            params: Some(GrowthParamsConfig {
                lambda: Some(1.0),
                ..Default::default()
            }),
            ..Default::default()
        })
        .unwrap();
    let boundary_fails = !boundary.with_mesh_elements(16).validate(50, 5).unwrap().pass;
    let inside_passes = Scenario::named("plap_jump")
        .unwrap()
        .with_mesh_elements(16)
        .validate(50, 5)
        .unwrap()
        .pass;
    let theta_zero = matches!(
        RunConfig::from_json(r#"{ "scenario": "heat", "theta": 0, "grid": { "kind": "uniform", "N": 4 } }"#),
        Err(Error::InvalidTheta(_))
    );
    outcome(
        tau_b == 0.5 && tau_a == 1.0 && boundary_fails && inside_passes && theta_zero,
        format!(
            "tau0 case B {tau_b}, case A {tau_a}; lambda boundary rejected {boundary_fails}, interior accepted {inside_passes}; theta=0 rejected {theta_zero}"
        ),
    )
}

/// `‖v‖_V^p` for Dirichlet P1 functions from interior nodal values.
fn v_norm(nodes: &[f64], interior: &[f64], p: f64) -> f64 {
    let mut vals = vec![0.0];
    vals.extend_from_slice(interior);
    vals.push(0.0);
    let s: f64 = (0..nodes.len() - 1)
        .map(|e| {
            let h = nodes[e + 1] - nodes[e];
            h * ((vals[e + 1] - vals[e]) / h).abs().powf(p)
        })
        .sum();
    s.powf(1.0 / p)
}

fn sphere_dual(nodes: &[f64], g: &[f64], p: f64, rng: &mut ChaCha8Rng) -> f64 {
    let d = g.len();
    let ratio = |v: &[f64]| g.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / v_norm(nodes, v, p);
    let mut best = vec![0.0; d];
    let mut best_val = f64::NEG_INFINITY;
    for _ in 0..200_000 {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = ratio(&v);
        if r > best_val {
            best_val = r;
            best = v;
        }
    }
    let mut radius = 0.05;
    while radius > 1e-9 {
        let mut improved = false;
        for _ in 0..200 {
            let v: Vec<f64> = best.iter().map(|x| x + radius * rng.gen_range(-1.0..1.0)).collect();
            let r = ratio(&v);
            if r > best_val {
                best_val = r;
                best = v;
                improved = true;
            }
        }
        if !improved {
            radius *= 0.5;
        }
    }
    best_val
}

fn dual_norms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst3 = 0.0_f64;
    let mut worst2 = 0.0_f64;
    for i in 0..50 {
        let mut nodes = vec![0.0];
        for _ in 0..4 {
            let last = *nodes.last().unwrap();
            nodes.push(last + rng.gen_range(0.1..0.4));
        }
        let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let space = FemSpace::new(SpatialMesh::from_nodes(nodes.clone(), BoundaryCondition::Dirichlet).unwrap(), 3.0).unwrap();
        let lib = space.dual(DVector::from_vec(g.clone())).unwrap().dual_norm().unwrap();
        let oracle = sphere_dual(&nodes, &g, 3.0, &mut rng);
        worst3 = worst3.max((lib - oracle).abs() / oracle.max(1.0));

        let space = FemSpace::new(SpatialMesh::from_nodes(nodes.clone(), BoundaryCondition::Dirichlet).unwrap(), 2.0).unwrap();
        let lib = space.dual(DVector::from_vec(g.clone())).unwrap().dual_norm().unwrap();
        let mut k = DMatrix::<f64>::zeros(3, 3);
        for e in 0..4 {
            let c = 1.0 / (nodes[e + 1] - nodes[e]);
            let idx = [e as isize - 1, e as isize];
            for (a, &ia) in idx.iter().enumerate() {
                for (b, &ib) in idx.iter().enumerate() {
                    if (0..3).contains(&ia) && (0..3).contains(&ib) {
                        k[(ia as usize, ib as usize)] += if a == b { c } else { -c };
                    }
                }
            }
        }
        let gv = DVector::from_vec(g);
        let riesz = gv.dot(&k.lu().solve(&gv).unwrap()).sqrt();
        worst2 = worst2.max((lib - riesz).abs());
        let _ = i;
    }
    outcome(
        worst3 <= 1e-4 && worst2 <= 1e-10,
        format!("p=3 vs sphere sampling {worst3:.2e} (tol 1e-4); p=2 vs Riesz {worst2:.2e} (tol 1e-10)"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {id:>2} {name}: {} [{:.2}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    };
    let s = Duration::from_secs;
    report(1, "algebraic identity", s(1), &mut algebraic_identity);
    report(2, "discrete duality identity", s(10), &mut bbb);
    report(3, "BV^q dynamic programme vs brute force", s(30), &mut bvq);
    report(4, "desk inclusion step and linear ODE", s(1), &mut desk);
    let mut heat_report = None;
    report(5, "manufactured heat study", s(120), &mut || {
        let study = heat_study(None);
        let o = heat(&study);
        heat_report = Some(study);
        o
    });
    let mut jump_report = None;
    report(6, "nonmonotone inclusion study", s(300), &mut || {
        let study = jump_study();
        let o = jump(&study);
        jump_report = Some(study);
        o
    });
    let studies: Vec<&StudyReport> = heat_report.iter().chain(jump_report.iter()).collect();
    report(7, "a priori uniformity", s(1), &mut || uniformity(&studies));
    report(8, "Clement convergence", s(5), &mut clement);
    report(9, "admissibility and hypothesis gates", s(1), &mut gates);
    report(10, "dual norm oracle", s(30), &mut dual_norms);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
