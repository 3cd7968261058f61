use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::fem::BoundaryCondition;
use crate::multifunction::{GrowthParams, Modulation};
use crate::operators::{HolderSpec, TimeProfile};
use crate::stepper::ThetaConfig;
use crate::time_grid::{GridKind, TimeGrid};

use super::scenario::{BranchName, MuName, Scenario};

/// Parses JSON, naming the offending key path and position on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            Error::Config(format!("{origin}: {inner}"))
        } else {
            Error::Config(format!("{origin}: at key `{path}`: {inner}"))
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

/// `Some(None)` for an explicit `null`, `None` when the key is absent.
fn explicit_null<'de, D, T>(d: D) -> std::result::Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Some(Option::deserialize(d)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKindName {
    Uniform,
    RandomRegular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub kind: GridKindName,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K_target", default, skip_serializing_if = "Option::is_none")]
    pub k_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn grid_kind(kind: GridKindName, k_target: Option<f64>, seed: Option<u64>) -> Result<GridKind> {
    Ok(match kind {
        GridKindName::Uniform => GridKind::Uniform,
        GridKindName::RandomRegular => GridKind::RandomRegular {
            k_target: k_target.ok_or_else(|| Error::Config("random_regular grids need `K_target`".into()))?,
            seed: seed.unwrap_or(0),
        },
    })
}

impl GridConfig {
    pub fn build(&self, horizon: f64) -> Result<TimeGrid> {
        match grid_kind(self.kind, self.k_target, self.seed)? {
            GridKind::Uniform => TimeGrid::uniform(horizon, self.n),
            GridKind::RandomRegular { k_target, seed } => TimeGrid::random_regular(horizon, self.n, k_target, seed),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshOverride {
    #[serde(rename = "M_elements", alias = "elements")]
    pub elements: Option<usize>,
    #[serde(rename = "L", alias = "length")]
    pub length: Option<f64>,
    pub bc: Option<BoundaryCondition>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorOverride {
    pub p: Option<f64>,
    pub mu: Option<MuName>,
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub reaction: Option<f64>,
    #[serde(default, deserialize_with = "explicit_null", skip_serializing_if = "Option::is_none")]
    pub holder: Option<Option<HolderSpec>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseName {
    A,
    B,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParamsConfig {
    pub c1: Option<f64>,
    pub d1: Option<f64>,
    pub c2: Option<f64>,
    pub d2: Option<f64>,
    pub lambda: Option<f64>,
    /// Constant lower bound `g`.
    pub g: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultifunctionOverride {
    pub branches: Option<BranchName>,
    pub jumps: Option<Vec<f64>>,
    pub height: Option<f64>,
    pub modulation: Option<Modulation>,
    pub case: Option<CaseName>,
    pub params: Option<GrowthParamsConfig>,
    pub iota_norm_bound: Option<f64>,
}

impl MultifunctionOverride {
    /// Merges the override into `current`; switching the case requires all
    /// constants of the new case.
    pub fn growth(&self, current: &GrowthParams) -> Result<GrowthParams> {
        let p = self.params.clone().unwrap_or_default();
        let case = self.case.unwrap_or(match current {
            GrowthParams::A { .. } => CaseName::A,
            GrowthParams::B { .. } => CaseName::B,
        });
        let missing = |k: &str| Error::Config(format!("multifunction.params.{k} is required for case {case:?}"));
        Ok(match (case, current) {
            (CaseName::A, GrowthParams::A { c1, d1 }) => GrowthParams::A {
                c1: p.c1.unwrap_or(*c1),
                d1: p.d1.unwrap_or(*d1),
            },
            (CaseName::A, _) => GrowthParams::A {
                c1: p.c1.ok_or_else(|| missing("c1"))?,
                d1: p.d1.ok_or_else(|| missing("d1"))?,
            },
            (CaseName::B, GrowthParams::B { c2, d2, lambda, g }) => GrowthParams::B {
                c2: p.c2.unwrap_or(*c2),
                d2: p.d2.unwrap_or(*d2),
                lambda: p.lambda.unwrap_or(*lambda),
                g: p.g.map(TimeProfile::constant).unwrap_or_else(|| g.clone()),
            },
            (CaseName::B, _) => GrowthParams::B {
                c2: p.c2.ok_or_else(|| missing("c2"))?,
                d2: p.d2.ok_or_else(|| missing("d2"))?,
                lambda: p.lambda.ok_or_else(|| missing("lambda"))?,
                g: TimeProfile::constant(p.g.unwrap_or(0.0)),
            },
        })
    }
}

/// Scenario selection plus overrides shared by runs and studies.
fn resolve_scenario(
    name: &str,
    horizon: Option<f64>,
    mesh: Option<&MeshOverride>,
    operator: Option<&OperatorOverride>,
    multifunction: Option<&MultifunctionOverride>,
) -> Result<Scenario> {
    let mut sc = Scenario::named(name)?;
    if let Some(h) = horizon {
        if !(h > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {h}")));
        }
        sc.horizon = h;
    }
    if let Some(m) = mesh {
        if let Some(e) = m.elements {
            sc.mesh.elements = e;
        }
        if let Some(l) = m.length {
            sc.mesh.length = l;
        }
        if let Some(bc) = m.bc {
            sc.mesh.bc = bc;
        }
    }
    if let Some(o) = operator {
        sc.apply_operator(o)?;
    }
    if let Some(m) = multifunction {
        sc.apply_multifunction(m)?;
    }
    Ok(sc)
}

fn default_newton_tol() -> f64 {
    ThetaConfig::default().newton_tol
}

fn default_eps_min() -> f64 {
    ThetaConfig::default().eps_min
}

fn default_c_eps() -> f64 {
    ThetaConfig::default().c_eps
}

fn theta_config(theta: f64, newton_tol: f64, strict: bool, eps_min: f64, c_eps: f64) -> Result<ThetaConfig> {
    let cfg = ThetaConfig {
        theta,
        newton_tol,
        strict_admissibility: strict,
        eps_min,
        c_eps,
        ..ThetaConfig::default()
    };
    cfg.check()?;
    Ok(cfg)
}

/// Configuration of a single run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub theta: f64,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multifunction: Option<MultifunctionOverride>,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default)]
    pub strict_admissibility: bool,
    #[serde(default = "default_eps_min")]
    pub eps_min: f64,
    #[serde(default = "default_c_eps")]
    pub c_eps: f64,
    /// Pointwise errors are taken at grid times `t ≥ epsilon_offset`.
    #[serde(default)]
    pub epsilon_offset: f64,
}

impl RunConfig {
    /// A config with default solver settings.
    pub fn new(scenario: &str, theta: f64, grid: GridConfig) -> Self {
        Self {
            scenario: scenario.into(),
            theta,
            grid,
            horizon: None,
            mesh: None,
            operator: None,
            multifunction: None,
            newton_tol: default_newton_tol(),
            strict_admissibility: false,
            eps_min: default_eps_min(),
            c_eps: default_c_eps(),
            epsilon_offset: 0.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = parse_json(text, "config")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        self.theta_config()?;
        Ok(())
    }

    pub fn theta_config(&self) -> Result<ThetaConfig> {
        theta_config(self.theta, self.newton_tol, self.strict_admissibility, self.eps_min, self.c_eps)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        resolve_scenario(
            &self.scenario,
            self.horizon,
            self.mesh.as_ref(),
            self.operator.as_ref(),
            self.multifunction.as_ref(),
        )
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        self.grid.build(self.scenario()?.horizon)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFamilyConfig {
    pub kind: GridKindName,
    #[serde(rename = "N")]
    pub counts: Vec<usize>,
    #[serde(rename = "K_target", default, skip_serializing_if = "Option::is_none")]
    pub k_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GridFamilyConfig {
    pub fn kind(&self) -> Result<GridKind> {
        grid_kind(self.kind, self.k_target, self.seed)
    }

    pub fn label(&self) -> String {
        match self.kind {
            GridKindName::Uniform => "uniform".into(),
            GridKindName::RandomRegular => format!(
                "random_regular(K={},seed={})",
                self.k_target.unwrap_or(f64::NAN),
                self.seed.unwrap_or(0)
            ),
        }
    }
}

/// A refinement study: every θ on every grid of every family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPlan {
    pub scenario: String,
    pub thetas: Vec<f64>,
    pub grids: Vec<GridFamilyConfig>,
    #[serde(default)]
    pub epsilon_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multifunction: Option<MultifunctionOverride>,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default)]
    pub strict_admissibility: bool,
    #[serde(default = "default_eps_min")]
    pub eps_min: f64,
    #[serde(default = "default_c_eps")]
    pub c_eps: f64,
}

impl StudyPlan {
    pub fn new(scenario: &str, thetas: Vec<f64>, grids: Vec<GridFamilyConfig>) -> Self {
        Self {
            scenario: scenario.into(),
            thetas,
            grids,
            epsilon_offset: 0.0,
            horizon: None,
            mesh: None,
            operator: None,
            multifunction: None,
            newton_tol: default_newton_tol(),
            strict_admissibility: false,
            eps_min: default_eps_min(),
            c_eps: default_c_eps(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = parse_json(text, "plan")?;
        plan.check()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let plan: Self = read_json(path)?;
        plan.check()?;
        Ok(plan)
    }

    pub fn check(&self) -> Result<()> {
        if self.thetas.is_empty() || self.grids.is_empty() {
            return Err(Error::Config("a study needs at least one theta and one grid family".into()));
        }
        for &t in &self.thetas {
            self.theta_config(t)?;
        }
        for (i, g) in self.grids.iter().enumerate() {
            if g.counts.is_empty() || g.counts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("grids[{i}].N must be nonempty and strictly increasing")));
            }
            g.kind()?;
        }
        Ok(())
    }

    pub fn theta_config(&self, theta: f64) -> Result<ThetaConfig> {
        theta_config(theta, self.newton_tol, self.strict_admissibility, self.eps_min, self.c_eps)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        resolve_scenario(
            &self.scenario,
            self.horizon,
            self.mesh.as_ref(),
            self.operator.as_ref(),
            self.multifunction.as_ref(),
        )
    }
}
