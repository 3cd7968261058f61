use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryCondition, DiscreteFunction, Embedding, EmbeddingMode, EmbeddingSpec, FemSpace, SpaceExt, SpatialMesh};
use crate::multifunction::{FilledGraph, GrowthParams, GrowthReport, Modulation};
use crate::operators::{HolderReport, HolderSpec, HypothesisReport, OperatorSpec, SourceSpec, TimeProfile};
use crate::stepper::{Inclusion, Problem};

use super::config::{MultifunctionOverride, OperatorOverride};

/// Names of the built-in scenarios.
pub const SCENARIOS: [&str; 6] = ["heat", "heat_tdep", "jump_source", "plap_jump", "robin_mv", "ode_desk"];

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub elements: usize,
    pub length: f64,
    pub bc: BoundaryCondition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchName {
    Heaviside,
    Sawtooth,
    CubicJump,
}

/// Named time profiles for `μ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuName {
    /// `μ ≡ 1`.
    Const,
    /// `μ(t) = 1 + t/2`.
    Linear,
    /// `μ(t) = 1 + cos(2πt)/2`.
    Cos,
}

impl MuName {
    pub fn profile(self) -> TimeProfile {
        match self {
            MuName::Const => TimeProfile::constant(1.0),
            MuName::Linear => TimeProfile::affine(1.0, 0.5),
            MuName::Cos => TimeProfile::Cos {
                c0: 1.0,
                c1: 0.5,
                omega: 2.0 * PI,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionSpec {
    pub branches: BranchName,
    pub jumps: Vec<f64>,
    /// Jump height (the drop for the sawtooth).
    pub height: f64,
    pub modulation: Modulation,
    pub growth: GrowthParams,
    pub embedding: EmbeddingSpec,
}

impl InclusionSpec {
    pub fn graph(&self) -> Result<FilledGraph> {
        let g = match self.branches {
            BranchName::Heaviside => FilledGraph::heaviside(&self.jumps, self.height)?,
            BranchName::Sawtooth => FilledGraph::sawtooth(&self.jumps, self.height)?,
            BranchName::CubicJump => FilledGraph::cubic_jump(&self.jumps, self.height)?,
        };
        Ok(g.with_modulation(self.modulation.profile()))
    }
}

/// How errors are measured.
#[derive(Clone)]
pub enum ReferenceKind {
    /// Closed-form solution `u(t, x)`.
    Exact(ScalarFn),
    /// The same solver on a uniform grid `factor` times finer with the given θ.
    FineGrid { factor: usize, theta: f64 },
}

impl fmt::Debug for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceKind::Exact(_) => f.write_str("Exact(..)"),
            ReferenceKind::FineGrid { factor, theta } => write!(f, "FineGrid {{ factor: {factor}, theta: {theta} }}"),
        }
    }
}

impl ReferenceKind {
    pub fn label(&self) -> &'static str {
        match self {
            ReferenceKind::Exact(_) => "exact",
            ReferenceKind::FineGrid { .. } => "fine_grid",
        }
    }
}

/// A fully specified model problem.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub horizon: f64,
    pub mesh: MeshSpec,
    pub operator: OperatorSpec,
    pub inclusion: Option<InclusionSpec>,
    pub source: ScalarFn,
    pub initial: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub reference: ReferenceKind,
    manufactured: bool,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("mesh", &self.mesh)
            .field("operator", &self.operator)
            .field("inclusion", &self.inclusion)
            .field("reference", &self.reference)
            .finish()
    }
}

fn manufactured(mu: TimeProfile, reaction: f64) -> (ScalarFn, ScalarFn) {
    let source: ScalarFn = Arc::new(move |t, x| (-1.0 + mu.eval(t) * PI * PI + reaction) * (-t).exp() * (PI * x).sin());
    let exact: ScalarFn = Arc::new(|t, x| (-t).exp() * (PI * x).sin());
    (source, exact)
}

impl Scenario {
    /// The registered scenario `name` with default parameters.
    pub fn named(name: &str) -> Result<Self> {
        let dirichlet = |elements| MeshSpec {
            elements,
            length: 1.0,
            bc: BoundaryCondition::Dirichlet,
        };
        let fine = ReferenceKind::FineGrid { factor: 16, theta: 0.5 };
        let sc = match name {
            "heat" | "heat_tdep" => {
                let mut op = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
                if name == "heat_tdep" {
                    op.mu = MuName::Linear.profile();
                    op.holder = Some(HolderSpec {
                        c1: 0.01,
                        c2: 0.5,
                        gamma: 1.0,
                        delta: 1.0,
                    });
                }
                let (source, exact) = manufactured(op.mu.clone(), 0.0);
                Scenario {
                    name: name.into(),
                    horizon: 1.0,
                    mesh: dirichlet(4096),
                    operator: op,
                    inclusion: None,
                    source,
                    initial: Arc::new(|x| (PI * x).sin()),
                    reference: ReferenceKind::Exact(exact),
                    manufactured: true,
                }
            }
            "jump_source" => {
                let mut op = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
                op.kappa = 1.0;
                op.beta = 1.0;
                Scenario {
                    name: name.into(),
                    horizon: 1.0,
                    mesh: dirichlet(64),
                    operator: op,
                    inclusion: Some(InclusionSpec {
                        branches: BranchName::Heaviside,
                        jumps: vec![0.5],
                        height: 1.0,
                        modulation: Modulation::Const,
                        growth: GrowthParams::A { c1: 1.0, d1: 0.0 },
                        embedding: EmbeddingSpec::source(),
                    }),
                    source: Arc::new(|t, x| 10.0 * t * (PI * x).sin()),
                    initial: Arc::new(|_| 0.0),
                    reference: fine,
                    manufactured: false,
                }
            }
            "plap_jump" => {
                let mut op = OperatorSpec::p_laplacian(3.0, TimeProfile::constant(1.0));
                op.kappa = 0.5;
                op.beta = 0.5;
                Scenario {
                    name: name.into(),
                    horizon: 1.0,
                    mesh: dirichlet(64),
                    operator: op,
                    inclusion: Some(InclusionSpec {
                        branches: BranchName::Sawtooth,
                        jumps: vec![0.5, 1.0],
                        height: 0.5,
                        modulation: Modulation::Const,
                        growth: GrowthParams::B {
                            c2: 0.5,
                            d2: 0.5,
                            lambda: 0.25,
                            g: TimeProfile::constant(0.0),
                        },
                        // ‖v‖_{L²} ≤ ‖v‖_∞ ≤ ‖v'‖_{L¹} ≤ ‖v'‖_{L³} on the unit interval
                        embedding: EmbeddingSpec::source().with_iota_bound(1.0),
                    }),
                    source: Arc::new(|_, x| 10.0 * (PI * x).sin()),
                    initial: Arc::new(|_| 0.0),
                    reference: fine,
                    manufactured: false,
                }
            }
            "robin_mv" => {
                let mut op = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
                op.kappa = 0.5;
                op.beta = 1.5;
                let mesh = MeshSpec {
                    elements: 64,
                    length: 1.0,
                    bc: BoundaryCondition::Natural,
                };
                let space = FemSpace::new(SpatialMesh::uniform(mesh.length, mesh.elements, mesh.bc)?, 2.0)?;
                let iota = Embedding::new(space, EmbeddingSpec::boundary())?.iota_norm();
                Scenario {
                    name: name.into(),
                    horizon: 1.0,
                    mesh,
                    operator: op,
                    inclusion: Some(InclusionSpec {
                        branches: BranchName::CubicJump,
                        jumps: vec![0.5],
                        height: 0.5,
                        modulation: Modulation::OnePlusCos,
                        growth: GrowthParams::B {
                            c2: 1.5,
                            d2: 2.0,
                            lambda: 0.5 / (iota * iota),
                            g: TimeProfile::constant(0.0),
                        },
                        embedding: EmbeddingSpec::boundary(),
                    }),
                    source: Arc::new(|_, _| 1.0),
                    initial: Arc::new(|x| (PI * x).cos()),
                    reference: fine,
                    manufactured: false,
                }
            }
            "ode_desk" => {
                let mut op = OperatorSpec::p_laplacian(2.0, TimeProfile::constant(1.0));
                op.reaction = 1.0;
                Scenario {
                    name: name.into(),
                    horizon: 1.0,
                    mesh: MeshSpec {
                        elements: 1,
                        length: 1.0,
                        bc: BoundaryCondition::Natural,
                    },
                    operator: op,
                    inclusion: Some(InclusionSpec {
                        branches: BranchName::Heaviside,
                        jumps: vec![0.0],
                        height: 1.0,
                        modulation: Modulation::Const,
                        growth: GrowthParams::A { c1: 1.0, d1: 0.0 },
                        embedding: EmbeddingSpec::source(),
                    }),
                    source: Arc::new(|_, _| 0.5),
                    initial: Arc::new(|_| 0.0),
                    reference: fine,
                    manufactured: false,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario '{other}' (known: {})",
                    SCENARIOS.join(", ")
                )))
            }
        };
        Ok(sc)
    }

    pub fn with_mesh_elements(mut self, elements: usize) -> Self {
        self.mesh.elements = elements;
        self
    }

    pub fn apply_operator(&mut self, o: &OperatorOverride) -> Result<()> {
        let op = &mut self.operator;
        if let Some(p) = o.p {
            op.p = p;
        }
        if let Some(mu) = o.mu {
            op.mu = mu.profile();
        }
        if let Some(v) = o.kappa {
            op.kappa = v;
        }
        if let Some(v) = o.alpha {
            op.alpha = v;
        }
        if let Some(v) = o.beta {
            op.beta = v;
        }
        if let Some(v) = o.reaction {
            op.reaction = v;
        }
        if let Some(h) = &o.holder {
            op.holder = *h;
        }
        if self.manufactured {
            if op.p == 2.0 && op.kappa == 0.0 {
                let (source, exact) = manufactured(op.mu.clone(), op.reaction);
                self.source = source;
                self.reference = ReferenceKind::Exact(exact);
            } else {
                warn!("operator override breaks the manufactured solution; using a fine-grid reference");
                self.reference = ReferenceKind::FineGrid { factor: 16, theta: 0.5 };
                self.manufactured = false;
            }
        }
        Ok(())
    }

    pub fn apply_multifunction(&mut self, m: &MultifunctionOverride) -> Result<()> {
        let Some(inc) = self.inclusion.as_mut() else {
            return Err(Error::Config(format!("scenario '{}' has no multivalued term", self.name)));
        };
        if let Some(b) = m.branches {
            inc.branches = b;
        }
        if let Some(j) = &m.jumps {
            inc.jumps = j.clone();
        }
        if let Some(h) = m.height {
            inc.height = h;
        }
        if let Some(md) = m.modulation {
            inc.modulation = md;
        }
        if let Some(b) = m.iota_norm_bound {
            inc.embedding.iota_norm_bound = Some(b);
        }
        if m.case.is_some() || m.params.is_some() {
            inc.growth = m.growth(&inc.growth)?;
        }
        Ok(())
    }

    pub fn space(&self) -> Result<Arc<FemSpace>> {
        FemSpace::new(
            SpatialMesh::uniform(self.mesh.length, self.mesh.elements, self.mesh.bc)?,
            self.operator.p,
        )
    }

    /// The discrete problem and the initial datum (its `L²` projection).
    pub fn build(&self) -> Result<(Problem, DiscreteFunction)> {
        self.operator.check()?;
        self.operator.mu_bounds(self.horizon)?;
        let space = self.space()?;
        let mut operator = self.operator.clone();
        operator.growth = operator.conservative_growth(&space, self.horizon);
        let inclusion = match &self.inclusion {
            Some(spec) => {
                spec.growth.check()?;
                let graph = spec.graph()?;
                graph.check(self.horizon)?;
                Some(Inclusion {
                    graph,
                    growth: spec.growth.clone(),
                    embedding: Embedding::new(Arc::clone(&space), spec.embedding)?,
                })
            }
            None => None,
        };
        let source = Arc::clone(&self.source);
        let initial = Arc::clone(&self.initial);
        let u0 = space.l2_project(|x| initial(x));
        Ok((
            Problem {
                space,
                operator,
                inclusion,
                source: SourceSpec::new(move |t, x| source(t, x)),
            },
            u0,
        ))
    }

    /// Runs the hypothesis validators with fixed seeds.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<ValidationReport> {
        let (problem, _) = self.build()?;
        let operator = problem
            .operator
            .validate_coercivity_growth(&problem.space, self.horizon, samples, seed)?;
        let holder = match self.operator.holder {
            Some(_) => Some(
                self.operator
                    .validate_holder(&problem.space, self.horizon, samples, seed + 1)?,
            ),
            None => None,
        };
        let growth = match &problem.inclusion {
            Some(inc) => Some(inc.graph.validate_growth(
                &inc.growth,
                &inc.embedding,
                self.operator.alpha,
                self.horizon,
                samples,
                seed + 2,
            )?),
            None => None,
        };
        let case_a_in_boundary_mode = matches!(
            (&self.inclusion, problem.inclusion.as_ref().map(|i| i.embedding.mode())),
            (Some(InclusionSpec { growth: GrowthParams::A { .. }, .. }), Some(EmbeddingMode::Boundary))
        );
        let pass = operator.pass()
            && holder.map_or(true, |h| h.pass)
            && growth.as_ref().map_or(true, GrowthReport::pass)
            && !case_a_in_boundary_mode;
        Ok(ValidationReport {
            scenario: self.name.clone(),
            samples,
            operator,
            holder,
            growth,
            pass,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub samples: usize,
    pub operator: HypothesisReport,
    pub holder: Option<HolderReport>,
    pub growth: Option<GrowthReport>,
    pub pass: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {} ({} samples per check)", self.scenario, self.samples)?;
        writeln!(f, "operator:")?;
        write!(f, "{}", self.operator)?;
        if let Some(h) = &self.holder {
            let verdict = if h.pass { "no violation found" } else { "VIOLATED" };
            writeln!(f, "time regularity:\n  worst ratio {:.6}: {verdict}", h.worst_ratio)?;
        }
        if let Some(g) = &self.growth {
            writeln!(f, "multivalued term:")?;
            write!(f, "{g}")?;
        }
        writeln!(f, "overall: {}", if self.pass { "pass" } else { "FAIL" })
    }
}
