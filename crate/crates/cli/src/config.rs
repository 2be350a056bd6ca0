//! Run configuration: TOML with sections, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stopbound::expr::{parse, Var};
use stopbound::{Orientation, StateSpace};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("expression for {key}: {source}")]
    Expression {
        key: String,
        source: stopbound::expr::ExprError,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub simulation: SimulationConfig,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckName>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Drift expression in `t`, `x`, `T`; exclusive with `drift_family`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_family: Option<FamilyConfig>,
    pub sigma: String,
    pub reward: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub running_reward: Option<String>,
    pub horizon: f64,
    #[serde(default = "default_state_space")]
    pub state_space: StateSpace,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    /// Solve for `w = v − g` with running reward `h = f + Lg`.
    #[serde(default)]
    pub reduce: bool,
    /// Centre of the state grid and start of the sample paths.
    #[serde(default)]
    pub x_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    BmTimeDrift {
        mu: String,
    },
    Gbm {
        gamma: String,
    },
    BrownianBridge {
        pin: f64,
        pin_time: f64,
    },
    OuTimeMean {
        theta: f64,
        m: String,
    },
    TwoPoint {
        p: f64,
        l: f64,
        r: f64,
    },
    Gaussian {
        mean: f64,
        var: f64,
    },
    Discrete {
        weights: Vec<f64>,
        locations: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nt: usize,
    pub nx: usize,
    /// Half-width of the state range in units of `σ √T`.
    pub x_pad: f64,
    pub theta: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nt: 400,
            nx: 400,
            x_pad: 5.0,
            theta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Required: there is no entropy-seeded default.
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coupling: Vec<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsmc: Option<LsmcConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub u: f64,
    pub t: f64,
    pub x: f64,
    #[serde(default = "default_region")]
    pub region: RegionChoice,
    /// The order statistic must stay below `c_ord · Δ`.
    #[serde(default = "default_c_ord")]
    pub c_ord: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionChoice {
    Everywhere,
    /// `M = {μ < −1e-12}`.
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsmcConfig {
    pub t: f64,
    pub x: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    #[serde(default = "default_degree")]
    pub basis_degree: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    GMonotone,
    MuTimeMonotoneEverywhere,
    MuTimeMonotoneRegion,
    ConditionIii,
    HMonotone,
    ValueTimeMonotone,
    BoundaryMonotone,
    ResidualComplementarity,
    ContinuityHeuristic,
    ComparisonOrder,
    LsmcAgreement,
}

impl CheckName {
    /// Checks that only need the coefficients, not a solved surface.
    pub fn is_hypothesis(self) -> bool {
        matches!(
            self,
            CheckName::GMonotone
                | CheckName::MuTimeMonotoneEverywhere
                | CheckName::MuTimeMonotoneRegion
                | CheckName::HMonotone
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    SurfaceCsv,
    BoundaryCsv,
    ReportJson,
    Summary,
    SimulationJson,
    PathsCsv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![
                Format::SurfaceCsv,
                Format::BoundaryCsv,
                Format::ReportJson,
                Format::Summary,
                Format::SimulationJson,
            ],
        }
    }
}

fn default_checks() -> Vec<CheckName> {
    vec![
        CheckName::GMonotone,
        CheckName::MuTimeMonotoneEverywhere,
        CheckName::ValueTimeMonotone,
        CheckName::BoundaryMonotone,
        CheckName::ResidualComplementarity,
    ]
}

fn default_state_space() -> StateSpace {
    StateSpace::RealLine
}

fn default_orientation() -> Orientation {
    Orientation::Lower
}

fn default_paths() -> usize {
    10_000
}

fn default_steps() -> usize {
    400
}

fn default_region() -> RegionChoice {
    RegionChoice::Everywhere
}

fn default_c_ord() -> f64 {
    1.0
}

fn default_degree() -> usize {
    3
}

fn check_expr(key: &str, text: &str) -> Result<stopbound::expr::Expr, ConfigError> {
    parse(text).map_err(|source| ConfigError::Expression {
        key: key.into(),
        source,
    })
}

impl RunConfig {
    /// Parses and validates a config document.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.problem;
        match (&p.drift, &p.drift_family) {
            (Some(d), None) => {
                check_expr("problem.drift", d)?;
            }
            (None, Some(f)) => match f {
                FamilyConfig::BmTimeDrift { mu } => {
                    check_expr("problem.drift_family.mu", mu)?;
                }
                FamilyConfig::Gbm { gamma } => {
                    check_expr("problem.drift_family.gamma", gamma)?;
                }
                FamilyConfig::OuTimeMean { m, .. } => {
                    check_expr("problem.drift_family.m", m)?;
                }
                FamilyConfig::Discrete { weights, locations }
                    if weights.len() != locations.len() =>
                {
                    return Err(ConfigError::Invalid(
                        "drift_family weights and locations differ in length".into(),
                    ));
                }
                _ => {}
            },
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "set either problem.drift or problem.drift_family, not both".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError::Invalid(
                    "problem.drift or problem.drift_family is required".into(),
                ))
            }
        }
        if check_expr("problem.sigma", &p.sigma)?.depends_on(Var::Time) {
            return Err(ConfigError::Invalid("sigma must not depend on t".into()));
        }
        check_expr("problem.reward", &p.reward)?;
        if let Some(f) = &p.running_reward {
            check_expr("problem.running_reward", f)?;
        }
        if !(p.horizon.is_finite() && p.horizon > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "problem.horizon must be positive, got {}",
                p.horizon
            )));
        }
        if p.state_space == StateSpace::PositiveHalfLine && !(p.x_ref > 0.0) {
            return Err(ConfigError::Invalid(
                "problem.x_ref must be positive on the half-line".into(),
            ));
        }
        if p.state_space == StateSpace::PositiveHalfLine && p.orientation == Orientation::Upper {
            return Err(ConfigError::Invalid(
                "upper orientation is only supported on the real line".into(),
            ));
        }
        let g = &self.grid;
        if g.nt < 2 || g.nx < 2 || !(g.x_pad > 0.0) || !(0.0..=1.0).contains(&g.theta) {
            return Err(ConfigError::Invalid(
                "grid needs nt, nx >= 2, x_pad > 0 and theta in [0, 1]".into(),
            ));
        }
        let s = &self.simulation;
        if s.n_paths < 2 || s.n_steps == 0 {
            return Err(ConfigError::Invalid(
                "simulation needs n_paths >= 2 and n_steps >= 1".into(),
            ));
        }
        for c in &s.coupling {
            if !(0.0 <= c.u && c.u <= c.t && c.t < p.horizon) {
                return Err(ConfigError::Invalid(format!(
                    "coupling needs 0 <= u <= t < T, got u={}, t={}",
                    c.u, c.t
                )));
            }
        }
        if self.checks.contains(&CheckName::ComparisonOrder) && s.coupling.is_empty() {
            return Err(ConfigError::Invalid(
                "check comparison_order needs [[simulation.coupling]]".into(),
            ));
        }
        if self.checks.contains(&CheckName::LsmcAgreement) && s.lsmc.is_none() {
            return Err(ConfigError::Invalid(
                "check lsmc_agreement needs [simulation.lsmc]".into(),
            ));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    RunConfig::from_toml(&text)
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<(), ConfigError> {
    std::fs::write(path, cfg.to_toml()).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "martingale"
[problem]
drift = "0"
sigma = "1"
reward = "x"
horizon = 1.0
[grid]
nt = 100
nx = 100
x_pad = 5.0
theta = 0.5
[simulation]
seed = 42
"#;

    #[test]
    fn minimal_config_loads() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.simulation.seed, 42);
        assert_eq!(cfg.grid.nt, 100);
        assert_eq!(cfg.problem.orientation, Orientation::Lower);
        assert_eq!(cfg.checks, default_checks());
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn time_dependent_sigma_is_rejected() {
        let err =
            RunConfig::from_toml(&MINIMAL.replace("sigma = \"1\"", "sigma = \"t*x\"")).unwrap_err();
        assert_eq!(err.to_string(), "sigma must not depend on t");
    }

    #[test]
    fn unknown_keys_are_named() {
        let err =
            RunConfig::from_toml(&MINIMAL.replace("drift = \"0\"", "driftt = \"0\"")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("driftt"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn unknown_check_names_are_rejected() {
        let text = MINIMAL.replace(
            "name = \"martingale\"",
            "name = \"m\"\nchecks = [\"g_monotonic\"]",
        );
        let msg = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(msg.contains("g_monotonic"), "{msg}");
    }

    #[test]
    fn seed_is_required() {
        let msg = RunConfig::from_toml(&MINIMAL.replace("seed = 42", ""))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("seed"), "{msg}");
    }

    #[test]
    fn expression_errors_keep_offsets() {
        let msg = RunConfig::from_toml(&MINIMAL.replace("reward = \"x\"", "reward = \"x +\""))
            .unwrap_err()
            .to_string();
        assert!(
            msg.contains("problem.reward") && msg.contains("offset 3"),
            "{msg}"
        );
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.simulation.seed = 43;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
